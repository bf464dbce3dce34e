"""
灵巧度指标
可操作度 μ = sqrt(det JJᵀ)、条件数及其解析梯度与 Hessian

∂S_k/∂q_i = [S_i, S_k]（i < k），因此 ∂J 只需要螺旋积
"""

import logging
from typing import Optional

import numpy as np
from scipy.linalg import lu_factor, lu_solve, svd

from .config import Config, get_config
from .core.chain import Chain, jacobian_spatial, joint_screws_spatial
from .core.screw import screw_bracket
from .errors import ModelError, NumericError, SingularityError

logger = logging.getLogger(__name__)

# det(JJᵀ) 允许的负舍入
NEGATIVE_DET_TOL = 1e-12


# ==================== 雅可比偏导 ====================

def jacobian_partials(chain: Chain, q) -> np.ndarray:
    """
    ∂J/∂q_i，形状 (n, 6, n)；第 k 列在 k > i 时为 [S_i, S_k]
    """
    S = joint_screws_spatial(chain, q)
    n = chain.n
    dJ = np.zeros((n, 6, n))
    for i in range(n):
        for k in range(i + 1, n):
            dJ[i, :, k] = screw_bracket(S[i], S[k])
    return dJ


def jacobian_second_partials(chain: Chain, q) -> np.ndarray:
    """
    ∂²J/∂q_i∂q_j，形状 (n, n, 6, n)；第 k 列在 max(i, j) < k 时为
    ad_{S_min(i,j)} ad_{S_max(i,j)} S_k
    """
    S = joint_screws_spatial(chain, q)
    n = chain.n
    ddJ = np.zeros((n, n, 6, n))
    for i in range(n):
        for j in range(i, n):
            for k in range(j + 1, n):
                v = screw_bracket(S[i], screw_bracket(S[j], S[k]))
                ddJ[i, j, :, k] = v
                ddJ[j, i, :, k] = v
    return ddJ


# ==================== 可操作度 ====================

def manipulability_mu(J) -> float:
    """
    μ = sqrt(det JJᵀ)

    Raises:
        NumericError: 行列式明显为负
    """
    J = np.atleast_2d(np.asarray(J, dtype=float))
    if J.shape[1] < J.shape[0]:
        # 列数少于行数时 JJᵀ 秩亏，μ 恒为零
        return 0.0
    A = J @ J.T
    D = float(np.linalg.det(A))
    if D < 0.0:
        scale = max(1.0, float(np.linalg.norm(A)) ** A.shape[0])
        if D < -NEGATIVE_DET_TOL * scale:
            raise NumericError(f"det(JJᵀ) 为负: {D:.3e}")
        return 0.0
    return float(np.sqrt(D))


def _gram_partials(J: np.ndarray, dJ: np.ndarray) -> np.ndarray:
    """∂A = ∂J Jᵀ + (∂J Jᵀ)ᵀ"""
    P = np.einsum("iak,bk->iab", dJ, J)
    return P + P.transpose(0, 2, 1)


def _det_partial(A: np.ndarray, dA: np.ndarray) -> float:
    """按列替换展开: ∂det A = Σ_r det(A 的第 r 列换成 ∂A 的第 r 列)"""
    total = 0.0
    for r in range(A.shape[1]):
        M = A.copy()
        M[:, r] = dA[:, r]
        total += float(np.linalg.det(M))
    return total


def _is_square_regular(J: np.ndarray, config: Config) -> bool:
    if J.shape[0] != J.shape[1]:
        return False
    sv = svd(J, compute_uv=False)
    return sv[-1] > 0 and sv[0] / sv[-1] < config.tolerances.cond_max


def _check_regular(J: np.ndarray, config: Config, what: str) -> None:
    sv = svd(J, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    if cond > config.tolerances.cond_max:
        raise SingularityError(f"奇异构型上 μ 的{what}无定义: σ_min = {sv[-1]:.3e}", float(sv[-1]), cond)


def mu_gradient(chain: Chain, q, method: str = "auto", config: Optional[Config] = None) -> np.ndarray:
    """
    ∂μ/∂q_i

    method:
        "det"  ：列替换行列式展开，∂μ = ∂det(JJᵀ)/(2μ)
        "trace"：J 为满秩方阵时 ∂μ/∂q_i = μ Σ_{k>i} (J⁻¹)_k [S_i, S_k]
        "auto" ：方阵且满秩时用 trace，否则用 det

    Raises:
        SingularityError: μ 为零或 trace 路径下 J 奇异
    """
    config = config or get_config()
    if method not in ("auto", "det", "trace"):
        raise ModelError(f"未知的求导方法: {method}")
    J = jacobian_spatial(chain, q)
    dJ = jacobian_partials(chain, q)
    if not dJ.any() or J.shape[1] < J.shape[0]:
        return np.zeros(chain.n)
    if method == "auto":
        method = "trace" if _is_square_regular(J, config) else "det"
    _check_regular(J, config, "梯度")
    mu = manipulability_mu(J)

    if method == "trace":
        if not _is_square_regular(J, config):
            raise SingularityError("trace 公式需要满秩方阵雅可比")
        lu = lu_factor(J)
        return np.array([mu * np.trace(lu_solve(lu, dJ[i])) for i in range(chain.n)])

    A = J @ J.T
    dA = _gram_partials(J, dJ)
    return np.array([_det_partial(A, dA[i]) / (2.0 * mu) for i in range(chain.n)])


def mu_hessian(chain: Chain, q, method: str = "auto", config: Optional[Config] = None) -> np.ndarray:
    """
    μ 的 Hessian

    det 路径（D = det A，A = JJᵀ，G_i = A⁻¹∂_iA）:
        ∂_iD = D tr G_i
        ∂_ijD = D (tr G_i tr G_j − tr(G_j G_i) + tr(A⁻¹∂_ijA))
        ∂_ijμ = ∂_ijD/(2μ) − ∂_iD ∂_jD/(4μ³)
    trace 路径（J 满秩方阵，K_i = J⁻¹∂_iJ）:
        ∂_ijμ = μ (tr K_i tr K_j − tr(K_j K_i) + tr(J⁻¹∂_ijJ))
    """
    config = config or get_config()
    if method not in ("auto", "det", "trace"):
        raise ModelError(f"未知的求导方法: {method}")
    J = jacobian_spatial(chain, q)
    dJ = jacobian_partials(chain, q)
    n = chain.n
    if not dJ.any() or J.shape[1] < J.shape[0]:
        return np.zeros((n, n))
    ddJ = jacobian_second_partials(chain, q)
    if method == "auto":
        method = "trace" if _is_square_regular(J, config) else "det"
    _check_regular(J, config, "Hessian")
    mu = manipulability_mu(J)

    H = np.zeros((n, n))
    if method == "trace":
        if not _is_square_regular(J, config):
            raise SingularityError("trace 公式需要满秩方阵雅可比")
        lu = lu_factor(J)
        K = [lu_solve(lu, dJ[i]) for i in range(n)]
        for i in range(n):
            for j in range(i, n):
                val = mu * (np.trace(K[i]) * np.trace(K[j]) - np.trace(K[j] @ K[i])
                            + np.trace(lu_solve(lu, ddJ[i, j])))
                H[i, j] = H[j, i] = val
        return H

    A = J @ J.T
    D = mu * mu
    lu = lu_factor(A)
    dA = _gram_partials(J, dJ)
    G = [lu_solve(lu, dA[i]) for i in range(n)]
    dD = np.array([D * np.trace(G[i]) for i in range(n)])
    for i in range(n):
        for j in range(i, n):
            P = ddJ[i, j] @ J.T + dJ[i] @ dJ[j].T
            ddA = P + P.T
            ddD = D * (np.trace(G[i]) * np.trace(G[j]) - np.trace(G[j] @ G[i])
                       + np.trace(lu_solve(lu, ddA)))
            H[i, j] = H[j, i] = ddD / (2.0 * mu) - dD[i] * dD[j] / (4.0 * mu ** 3)
    return H


# ==================== 条件数 ====================

def _dexterity_matrix(J: np.ndarray) -> np.ndarray:
    """方阵用 J 本身，否则用 JJᵀ"""
    return J if J.shape[0] == J.shape[1] else J @ J.T


def _dexterity_matrix_partial(J: np.ndarray, dJ: np.ndarray) -> np.ndarray:
    if J.shape[0] == J.shape[1]:
        return dJ
    P = dJ @ J.T
    return P + P.T


def _inverse(A: np.ndarray, config: Config, squared: bool) -> np.ndarray:
    """squared 为真时 A = JJᵀ，条件数门限取 cond_max²"""
    sv = svd(A, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
    limit = config.tolerances.cond_max ** (2 if squared else 1)
    if cond > limit:
        raise SingularityError(f"矩阵奇异: σ_min = {sv[-1]:.3e}", float(sv[-1]), cond)
    return np.linalg.inv(A)


def condition_number(J, config: Optional[Config] = None) -> float:
    """κ = ‖A‖_F ‖A⁻¹‖_F，A = JJᵀ（J 为方阵时 A = J）"""
    config = config or get_config()
    J = np.atleast_2d(np.asarray(J, dtype=float))
    A = _dexterity_matrix(J)
    return float(np.linalg.norm(A) * np.linalg.norm(_inverse(A, config, A is not J)))


def condition_number_2(J) -> float:
    """经典 2-范数条件数 σ_max/σ_min"""
    sv = svd(np.atleast_2d(np.asarray(J, dtype=float)), compute_uv=False)
    return float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")


def inv_condition(J, config: Optional[Config] = None) -> float:
    return 1.0 / condition_number(J, config)


def inv_condition_directional(J, dJ, config: Optional[Config] = None) -> float:
    """
    1/κ 沿 J 的变化方向 dJ 的方向导数

        ∂‖A‖ = tr(Aᵀ∂A)/‖A‖，∂A⁻¹ = −A⁻¹∂A A⁻¹
        ∂(1/κ) = −(∂‖A‖ ‖A⁻¹‖ + ‖A‖ ∂‖A⁻¹‖)/κ²
    """
    config = config or get_config()
    J = np.atleast_2d(np.asarray(J, dtype=float))
    dJ = np.asarray(dJ, dtype=float)
    A = _dexterity_matrix(J)
    dA = _dexterity_matrix_partial(J, dJ)
    Ainv = _inverse(A, config, A is not J)
    nA, nAinv = float(np.linalg.norm(A)), float(np.linalg.norm(Ainv))
    dAinv = -Ainv @ dA @ Ainv
    d_nA = float(np.sum(A * dA)) / nA
    d_nAinv = float(np.sum(Ainv * dAinv)) / nAinv
    kappa = nA * nAinv
    return -(d_nA * nAinv + nA * d_nAinv) / kappa ** 2


def inv_condition_gradient(chain: Chain, q, config: Optional[Config] = None) -> np.ndarray:
    """∂(1/κ)/∂q_i"""
    J = jacobian_spatial(chain, q)
    dJ = jacobian_partials(chain, q)
    return np.array([inv_condition_directional(J, dJ[i], config) for i in range(chain.n)])


def inv_condition_hessian(chain: Chain, q, step: float = 1e-6,
                          config: Optional[Config] = None) -> np.ndarray:
    """1/κ 的 Hessian（数值）：解析梯度的中心差分，再对称化"""
    q = chain.check_q(q)
    n = chain.n
    H = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = step
        H[:, j] = (inv_condition_gradient(chain, q + e, config)
                   - inv_condition_gradient(chain, q - e, config)) / (2.0 * step)
    return 0.5 * (H + H.T)
