"""
高阶逆运动学

非冗余串联机械臂: 由末端速度螺旋及其导数逐阶求 q̇ … q^(k)
广义逆运动学: 由各连杆速度螺旋逐关节求解
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import qr, solve_triangular, svd

from .config import Config, get_config
from .core.chain import Chain, DerivativeStack, jacobian_spatial, joint_screws_spatial
from .core.derivatives import chainwise_derivatives
from .core.multiindex import binomial
from .core.screw import screw_bracket
from .errors import DerivativeOrderError, ModelError, SingularityError, ZeroScrewError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class IKResult:
    """
    逆运动学结果

    q_derivs[r-1] = q^(r)，r = 1..k；twists[l, i-1] = D^l V_i^s，l = 0..k−1
    """
    q: np.ndarray
    q_derivs: np.ndarray
    twists: np.ndarray
    sigma_min: float
    condition: float

    @property
    def order(self) -> int:
        return self.q_derivs.shape[0]

    def stack(self) -> DerivativeStack:
        return DerivativeStack(self.q, tuple(self.q_derivs))

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "q_derivs": self.q_derivs.tolist(),
            "twists": self.twists.tolist(),
            "sigma_min": self.sigma_min,
            "condition": self.condition,
        }


class _SquareSolver:
    """列主元 QR 分解一次，各阶复用"""

    def __init__(self, J: np.ndarray, config: Config):
        m, n = J.shape
        if m != n:
            raise ModelError(f"雅可比不是方阵 ({m}×{n})：冗余或欠驱动链需要用 rows= 选择任务行")
        sv = svd(J, compute_uv=False)
        self.sigma_min = float(sv[-1])
        self.condition = float(sv[0] / sv[-1]) if sv[-1] > 0 else float("inf")
        if self.condition > config.tolerances.cond_max:
            raise SingularityError(
                f"雅可比奇异或病态: σ_min = {self.sigma_min:.3e}，条件数 {self.condition:.3e}",
                self.sigma_min, self.condition)
        self.Q, self.R, self.P = qr(J, pivoting=True)

    def solve(self, b: np.ndarray) -> np.ndarray:
        z = solve_triangular(self.R, self.Q.T @ b)
        x = np.empty_like(z)
        x[self.P] = z
        return x


def _select_rows(rows: Optional[Sequence[int]]) -> List[int]:
    if rows is None:
        return list(range(6))
    rows = [int(r) - 1 for r in rows]
    if len(set(rows)) != len(rows) or any(not 0 <= r < 6 for r in rows):
        raise ModelError(f"任务行必须是 1..6 中互不相同的序号: {[r + 1 for r in rows]}")
    return rows


def _ee_derivs(V_derivs, k_max: int) -> np.ndarray:
    V = np.atleast_2d(np.asarray(V_derivs, dtype=float))
    if V.shape[1] != 6:
        raise ModelError(f"末端速度螺旋导数必须是 6 维: 形状 {V.shape}")
    if V.shape[0] > k_max:
        raise DerivativeOrderError(f"阶数 {V.shape[0]} 超过上限 k_max = {k_max}")
    return V


def ik_derivatives(chain: Chain, q, V_derivs, rows: Optional[Sequence[int]] = None,
                   config: Optional[Config] = None) -> IKResult:
    """
    k 阶逆运动学

    对 r = 1..k 交替执行：
        1. J q^(r) = D^(r−1)V_n − Σ_i Σ_{l=1}^{r−1} C(r−1, l) D^l S_i q_i^(r−l)
        2. 用已得到的 q^(1..r) 更新 D^l S_i 与 D^(r−1)V_i

    Args:
        V_derivs: [V, V̇, …, D^(k−1)V]，形状 (k, 6)
        rows: 任务行（1 起），用于从 6 行中选出方阵

    Raises:
        SingularityError: 雅可比条件数超过 cond_max
    """
    config = config or get_config()
    q = chain.check_q(q)
    V = _ee_derivs(V_derivs, config.k_max)
    k = V.shape[0]
    sel = _select_rows(rows)
    S = joint_screws_spatial(chain, q)
    solver = _SquareSolver(jacobian_spatial(chain, q)[sel], config)

    qd = np.zeros((k + 1, chain.n))
    qd[0] = q
    for r in range(1, k + 1):
        b = V[r - 1].copy()
        if r > 1:
            dS, _ = chainwise_derivatives(S, qd[:r])
            for l in range(1, r):
                b -= binomial(r - 1, l) * np.einsum("ij,i->j", dS[l], qd[r - l])
        qd[r] = solver.solve(b[sel])

    _, twists = chainwise_derivatives(S, qd)
    logger.debug("逆运动学 %d 阶完成，条件数 %.3e", k, solver.condition)
    return IKResult(q=q, q_derivs=qd[1:], twists=twists, sigma_min=solver.sigma_min,
                    condition=solver.condition)


def ik_explicit_low_order(chain: Chain, q, V_derivs, rows: Optional[Sequence[int]] = None,
                          config: Optional[Config] = None) -> np.ndarray:
    """
    展开的一至四阶公式，与速度螺旋递推交替计算

        q̇ = J⁻¹V
        q̈ = J⁻¹(V̇ − Σ q̇_i ad_{V_i} S_i)
        q⃛ = J⁻¹(V̈ − Σ (2 q̈_i Ṡ_i + q̇_i S̈_i))
        q⃜ = J⁻¹(V⃛ − Σ (3 q⃛_i Ṡ_i + 3 q̈_i S̈_i + q̇_i S⃛_i))

    Returns:
        形状 (k, n)
    """
    config = config or get_config()
    q = chain.check_q(q)
    V = _ee_derivs(V_derivs, config.k_max)
    k = V.shape[0]
    if k > 4:
        raise DerivativeOrderError(f"展开公式只到 4 阶，请求 {k} 阶")
    sel = _select_rows(rows)
    S = joint_screws_spatial(chain, q)
    solver = _SquareSolver(jacobian_spatial(chain, q)[sel], config)
    n = chain.n
    out = np.zeros((k, n))

    out[0] = solver.solve(V[0][sel])
    if k == 1:
        return out
    # V_{i−1} 及 Ṡ_i
    Vprev = np.cumsum(S * out[0][:, None], axis=0) - S * out[0][:, None]
    S1 = np.array([screw_bracket(Vprev[i], S[i]) for i in range(n)])
    out[1] = solver.solve((V[1] - np.einsum("ij,i->j", S1, out[0]))[sel])
    if k == 2:
        return out
    dVprev = np.cumsum(S * out[1][:, None] + S1 * out[0][:, None], axis=0)
    dVprev = np.vstack([np.zeros(6), dVprev[:-1]])
    S2 = np.array([screw_bracket(dVprev[i], S[i]) + screw_bracket(Vprev[i], S1[i]) for i in range(n)])
    b = V[2] - np.einsum("ij,i->j", 2.0 * S1, out[1]) - np.einsum("ij,i->j", S2, out[0])
    out[2] = solver.solve(b[sel])
    if k == 3:
        return out
    ddV = np.cumsum(S * out[2][:, None] + 2.0 * S1 * out[1][:, None] + S2 * out[0][:, None], axis=0)
    ddVprev = np.vstack([np.zeros(6), ddV[:-1]])
    S3 = np.empty_like(S)
    for i in range(n):
        v, dv, ddv, s = Vprev[i], dVprev[i], ddVprev[i], S[i]
        S3[i] = (screw_bracket(ddv, s) + 2.0 * screw_bracket(dv, screw_bracket(v, s))
                 + screw_bracket(v, screw_bracket(dv, s))
                 + screw_bracket(v, screw_bracket(v, screw_bracket(v, s))))
    b = (V[3] - np.einsum("ij,i->j", 3.0 * S1, out[2]) - np.einsum("ij,i->j", 3.0 * S2, out[1])
         - np.einsum("ij,i->j", S3, out[0]))
    out[3] = solver.solve(b[sel])
    return out


# ==================== 广义逆运动学 ====================

def _screw_pinv(s: np.ndarray, j: int) -> np.ndarray:
    norm2 = float(s @ s)
    if norm2 == 0.0:
        raise ZeroScrewError(f"关节 {j} 的螺旋为零，无法求伪逆")
    return s / norm2


def generalized_ik(chain: Chain, q, twists) -> np.ndarray:
    """
    由各连杆速度螺旋及其导数逐关节求 q 的导数

        q_i^(r) = S_i⁺ (D^(r−1)(V_i − V_{i−1}) − Σ_{l=1}^{r−1} C(r−1, l) D^l S_i q_i^(r−l))
        D^l S_i = Σ_{t<l} C(l−1, t) [D^t V_{i−1}, D^{l−1−t} S_i]

    S_i⁺ = S_iᵀ/‖S_i‖²；数据不相容时为每个关节的最小二乘解

    Args:
        twists: 形状 (k, n, 6)，twists[l, i-1] = D^l V_i

    Returns:
        形状 (k, n)，第 r−1 行为 q^(r)
    """
    q = chain.check_q(q)
    T = np.asarray(twists, dtype=float)
    if T.ndim != 3 or T.shape[1:] != (chain.n, 6):
        raise ModelError(f"速度螺旋数据形状应为 (k, {chain.n}, 6)，实际 {T.shape}")
    k = T.shape[0]
    S = joint_screws_spatial(chain, q)
    out = np.zeros((k, chain.n))
    prev = np.zeros((k, 6))
    for i in range(chain.n):
        pinv = _screw_pinv(S[i], i + 1)
        dS = np.zeros((k, 6))
        dS[0] = S[i]
        for l in range(1, k):
            for t in range(l):
                dS[l] += binomial(l - 1, t) * screw_bracket(prev[t], dS[l - 1 - t])
        delta = T[:, i] - prev
        for r in range(1, k + 1):
            b = delta[r - 1].copy()
            for l in range(1, r):
                b -= binomial(r - 1, l) * dS[l] * out[r - l - 1, i]
            out[r - 1, i] = pinv @ b
        prev = T[:, i]
    return out


def generalized_ik_accel_geometric(chain: Chain, q, twists) -> np.ndarray:
    """
    二阶的几何形式

        q̈_i = S_i⁺(V̇_i − V̇_{i−1}) − q̇_i (ξ_i × η_i)ᵀ v_i / ‖S_i‖²

    v_i 为 V_i 的线部

    Returns:
        形状 (n,) 的 q̈
    """
    q = chain.check_q(q)
    T = np.asarray(twists, dtype=float)
    if T.ndim != 3 or T.shape[0] < 2 or T.shape[1:] != (chain.n, 6):
        raise ModelError(f"需要形状 (≥2, {chain.n}, 6) 的速度螺旋数据，实际 {T.shape}")
    S = joint_screws_spatial(chain, q)
    qd = generalized_ik(chain, q, T[:1])[0]
    qdd = np.zeros(chain.n)
    prev = np.zeros(6)
    for i in range(chain.n):
        s = S[i]
        norm2 = float(s @ s)
        pinv = _screw_pinv(s, i + 1)
        v = T[0, i, 3:]
        qdd[i] = pinv @ (T[1, i] - prev) - qd[i] * np.cross(s[:3], s[3:]) @ v / norm2
        prev = T[1, i]
    return qdd
