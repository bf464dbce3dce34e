"""
闭环约束的高阶求解
以独立坐标 u 的导数表示全部关节变量的导数，并给出运动的 Taylor 近似

曲线参数不必是时间，这里只按抽象参数 t 处理
"""

import logging
from dataclasses import dataclass, field
from math import factorial
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lu_factor, lu_solve, pinv, qr, svd

from .config import Config, get_config
from .core.chain import DerivativeStack, joint_screws_spatial
from .core.derivatives import chainwise_derivatives
from .core.multiindex import binomial
from .errors import DerivativeOrderError, ModelError, SingularityError
from .mobility import LoopLike, LoopSystem, as_loop_system, check_closure, numeric_rank, reduction_matrix

logger = logging.getLogger(__name__)


# ==================== 坐标划分 ====================

@dataclass(frozen=True)
class CoordinateSplit:
    """
    关节变量划分为非独立坐标 d（I_d）与独立坐标 u（I_u），序号从 1 开始
    """
    dependent: Tuple[int, ...]
    independent: Tuple[int, ...]

    def __post_init__(self):
        dep = tuple(sorted(int(i) for i in self.dependent))
        ind = tuple(sorted(int(i) for i in self.independent))
        if set(dep) & set(ind):
            raise ModelError(f"坐标划分有交集: I_d={dep}, I_u={ind}")
        object.__setattr__(self, "dependent", dep)
        object.__setattr__(self, "independent", ind)

    @classmethod
    def from_independent(cls, n: int, independent: Sequence[int]) -> "CoordinateSplit":
        ind = {int(i) for i in independent}
        return cls(tuple(i for i in range(1, n + 1) if i not in ind), tuple(ind))

    @property
    def n(self) -> int:
        return len(self.dependent) + len(self.independent)

    @property
    def m(self) -> int:
        return len(self.dependent)

    @property
    def delta(self) -> int:
        return len(self.independent)

    @property
    def d_idx(self) -> List[int]:
        return [i - 1 for i in self.dependent]

    @property
    def u_idx(self) -> List[int]:
        return [i - 1 for i in self.independent]

    def check(self, n: int) -> None:
        if sorted(self.dependent + self.independent) != list(range(1, n + 1)):
            raise ModelError(f"坐标划分必须覆盖 1..{n}: I_d={self.dependent}, I_u={self.independent}")

    def to_dict(self) -> dict:
        return {"dependent": list(self.dependent), "independent": list(self.independent)}


def _jd_condition(Jd: np.ndarray) -> Tuple[float, float]:
    sv = svd(Jd, compute_uv=False)
    if sv.size == 0:
        return float("inf"), 1.0
    smin = float(sv[-1])
    return smin, (float(sv[0] / smin) if smin > 0 else float("inf"))


def validate_split(loops: LoopLike, q, split: CoordinateSplit,
                   config: Optional[Config] = None) -> None:
    """
    检查 |I_d| = rank J 且 J_d 列满秩、条件数 < cond_max

    Raises:
        SingularityError: J_d 奇异或病态
    """
    config = config or get_config()
    system = as_loop_system(loops)
    split.check(system.n_global)
    J = system.jacobian(q)
    m, _ = numeric_rank(J, config)
    if split.m != m:
        raise ModelError(f"非独立坐标数 {split.m} 与 rank J = {m} 不一致")
    if m == 0:
        return
    smin, cond = _jd_condition(J[:, split.d_idx])
    if cond > config.tolerances.cond_max:
        raise SingularityError(
            f"J_d 奇异或病态（I_d={split.dependent}）: σ_min = {smin:.3e}，条件数 {cond:.3e}",
            smin, cond)


def select_split(loops: LoopLike, q, config: Optional[Config] = None) -> CoordinateSplit:
    """列主元 QR 选出 m = rank J 个条件最好的非独立列，其余为独立坐标"""
    config = config or get_config()
    system = as_loop_system(loops)
    q = system.check_q(q)
    check_closure(system, q, config)
    J = system.jacobian(q)
    m, ill = numeric_rank(J, config)
    if ill:
        logger.warning("rank J 可能不是局部常数: 奇异值间隙小于 %.0e", config.tolerances.gap_warn)
    if m == 0:
        return CoordinateSplit((), tuple(range(1, system.n_global + 1)))
    _, _, P = qr(J, pivoting=True, mode="economic")
    dep = tuple(int(p) + 1 for p in P[:m])
    split = CoordinateSplit(dep, tuple(i for i in range(1, system.n_global + 1) if i not in dep))
    logger.debug("自动选择坐标划分: I_d=%s, I_u=%s", split.dependent, split.independent)
    return split


# ==================== 高阶导数 ====================

@dataclass(eq=False)
class LoopSolution:
    """
    闭环约束的高阶解

    q_derivs[l-1] = q^(l)；D_derivs[l] = D^(l)D（公式路径才有），D = −J_d⁻¹ J_u
    """
    q: np.ndarray
    q_derivs: np.ndarray
    split: CoordinateSplit
    method: str
    D_derivs: List[np.ndarray] = field(default_factory=list)

    @property
    def order(self) -> int:
        return self.q_derivs.shape[0]

    @property
    def F(self) -> np.ndarray:
        """切空间基 F，行按全局变量排列，d 行为 D、u 行为 I"""
        n, delta = self.split.n, self.split.delta
        F = np.zeros((n, delta))
        F[self.split.u_idx] = np.eye(delta)
        if self.D_derivs:
            F[self.split.d_idx] = self.D_derivs[0]
        return F

    def stack(self) -> DerivativeStack:
        return DerivativeStack(self.q, tuple(self.q_derivs))

    def to_dict(self) -> dict:
        return {
            "q": self.q.tolist(),
            "q_derivs": self.q_derivs.tolist(),
            "split": self.split.to_dict(),
            "method": self.method,
        }


def _u_derivs(u_derivs, delta: int, k_max: int) -> np.ndarray:
    U = np.asarray(u_derivs, dtype=float)
    if U.ndim == 1 and delta == 1:
        U = U[:, None]
    if U.ndim != 2 or U.shape[1] != delta:
        raise ModelError(f"独立坐标导数形状应为 (k, {delta})，实际 {U.shape}")
    if U.shape[0] > k_max:
        raise DerivativeOrderError(f"阶数 {U.shape[0]} 超过上限 k_max = {k_max}")
    return U


def _jacobian_derivatives(system: LoopSystem, qd: np.ndarray) -> np.ndarray:
    """
    D^t J，t = 0..m，qd 形状 (m+1, n) 为已知的 q 及其导数

    Returns:
        形状 (m+1, 6L, n)
    """
    m = qd.shape[0] - 1
    out = np.zeros((m + 1, 6 * system.n_loops, system.n_global))
    for l, loop in enumerate(system.loops):
        local = loop.local(qd)
        S = joint_screws_spatial(loop.chain, local[0])
        dS = chainwise_derivatives(S, local)[0] if m >= 1 else S[None]
        for j, (g, s) in enumerate(zip(loop.indices, loop.signs)):
            out[:, 6 * l:6 * l + 6, g] += s * dS[:, j]
    return out


def loop_derivatives(loops: LoopLike, q, split: CoordinateSplit, u_derivs,
                     config: Optional[Config] = None) -> LoopSolution:
    """
    由 u̇ … u^(k) 求 q̇ … q^(k)

    在闭包代数约化后的 J̄ = Ū J 上，J̄_d 为方阵时按公式逐阶递推：
        D^(l)J̄_d⁻¹ = −J̄_d⁻¹ Σ_{t=1}^{l} C(l, t) D^(t)J̄_d D^(l−t)J̄_d⁻¹
        D^(l)D     = −Σ_{t=0}^{l} C(l, t) D^(t)J̄_d⁻¹ D^(l−t)J̄_u
        d^(k)      = Σ_{t=0}^{k−1} C(k−1, t) D^(t)D u^(k−t)
    q^(l) 反过来进入螺旋导数，因此逐阶交替。J̄_d 不是方阵时改用伪逆的直接递推

    Raises:
        ClosureViolationError: q 不在闭环构型上
        SingularityError: J_d 奇异
    """
    config = config or get_config()
    system = as_loop_system(loops)
    q = system.check_q(q)
    check_closure(system, q, config)
    validate_split(system, q, split, config)
    U = _u_derivs(u_derivs, split.delta, config.k_max)

    Ubar = reduction_matrix(system, config)
    if Ubar.shape[0] != split.m:
        logger.debug("约化后 J̄_d 为 %d×%d，改用直接递推", Ubar.shape[0], split.m)
        return loop_derivatives_direct(system, q, split, U, config)

    k = U.shape[0]
    n = system.n_global
    d_idx, u_idx = split.d_idx, split.u_idx
    qd = np.zeros((k + 1, n))
    qd[0] = q
    qd[1:, u_idx] = U
    if split.m == 0 or k == 0:
        return LoopSolution(q, qd[1:], split, "formula", [])

    lu = lu_factor(Ubar @ system.jacobian(q)[:, d_idx], check_finite=False)
    Jinv0 = lu_solve(lu, np.eye(split.m))
    Jinv: List[np.ndarray] = []
    Dd: List[np.ndarray] = []
    for order in range(1, k + 1):
        # 已知 q 的 0..order−1 阶，得到 J̄ 的 0..order−1 阶导数
        dJ = np.einsum("ab,tbn->tan", Ubar, _jacobian_derivatives(system, qd[:order]))
        l = order - 1
        if l == 0:
            Jinv.append(Jinv0)
        else:
            acc = np.zeros((split.m, split.m))
            for t in range(1, l + 1):
                acc += binomial(l, t) * dJ[t][:, d_idx] @ Jinv[l - t]
            Jinv.append(-Jinv0 @ acc)
        D = np.zeros((split.m, split.delta))
        for t in range(l + 1):
            D -= binomial(l, t) * Jinv[t] @ dJ[l - t][:, u_idx]
        Dd.append(D)
        d = np.zeros(split.m)
        for t in range(order):
            d += binomial(order - 1, t) * Dd[t] @ U[order - t - 1]
        qd[order, d_idx] = d
    return LoopSolution(q, qd[1:], split, "formula", Dd)


def loop_derivatives_direct(loops: LoopLike, q, split: CoordinateSplit, u_derivs,
                            config: Optional[Config] = None) -> LoopSolution:
    """
    直接逐阶求解 H^(k) = 0：
        d^(k) = −J_d⁺ (J_u u^(k) + R_k)
    R_k 为 q^(k) 取零时的 H^(k)；J_d⁺ 为 Moore–Penrose 伪逆（阈值 rank_rel·σ_max）。
    关闭 pseudoinverse 时只接受列满秩的 J_d，用法方程 (J_dᵀJ_d)⁻¹J_dᵀ

    Raises:
        SingularityError: 关闭 pseudoinverse 且 J_d 列秩不足
    """
    config = config or get_config()
    system = as_loop_system(loops)
    q = system.check_q(q)
    check_closure(system, q, config)
    split.check(system.n_global)
    U = _u_derivs(u_derivs, split.delta, config.k_max)
    k = U.shape[0]
    n = system.n_global
    d_idx, u_idx = split.d_idx, split.u_idx
    qd = np.zeros((k + 1, n))
    qd[0] = q
    qd[1:, u_idx] = U
    if split.m == 0 or k == 0:
        return LoopSolution(q, qd[1:], split, "direct")

    J = system.jacobian(q)
    Jd = J[:, d_idx]
    if config.pseudoinverse:
        Jd_pinv = pinv(Jd, rtol=config.tolerances.rank_rel)
    else:
        rank, _ = numeric_rank(Jd, config)
        if rank < split.m:
            smin, cond = _jd_condition(Jd)
            raise SingularityError(f"J_d 列秩 {rank} < {split.m}，未启用伪逆", smin, cond)
        # 列满秩：法方程的解即精确解
        Jd_pinv = cho_solve(cho_factor(Jd.T @ Jd), Jd.T)
    for order in range(1, k + 1):
        trial = qd[:order + 1].copy()
        trial[order, d_idx] = 0.0
        stack = DerivativeStack(trial[0], tuple(trial[1:]))
        R = system.constraint_maps(stack, order)[order - 1]
        qd[order, d_idx] = -Jd_pinv @ R
    return LoopSolution(q, qd[1:], split, "direct")


# ==================== Taylor 近似 ====================

def taylor_coefficients(solution: LoopSolution) -> np.ndarray:
    """q(t + Δt) ≈ Σ c_l Δtˡ 的系数 c_l = q^(l)/l!，形状 (K+1, n)"""
    coeffs = [solution.q]
    for l, d in enumerate(solution.q_derivs, 1):
        coeffs.append(d / factorial(l))
    return np.array(coeffs)


def loop_taylor_motion(loops: LoopLike, q, split: CoordinateSplit, u_derivs, dt: float, K: int,
                       config: Optional[Config] = None) -> np.ndarray:
    """
    q(t) + Δt q̇ + … + Δtᴷ q^(K)/K!

    Args:
        u_derivs: 至少 K 阶的独立坐标导数
    """
    config = config or get_config()
    U = _u_derivs(u_derivs, split.delta, max(config.k_max, K))
    if U.shape[0] < K:
        raise DerivativeOrderError(f"Taylor 近似需要 {K} 阶独立坐标导数，只给了 {U.shape[0]} 阶")
    if K == 0:
        return as_loop_system(loops).check_q(q).copy()
    solution = loop_derivatives(loops, q, split, U[:K], config)
    coeffs = taylor_coefficients(solution)
    return np.polynomial.polynomial.polyval(dt, coeffs)
