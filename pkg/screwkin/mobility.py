"""
闭环约束的高阶分析
任意阶约束映射 H^(i)、运动学切锥（可行性判定）、Lie 闭包代数、
CKG 结构自由度、冗余约束消除、按秩分层的奇异性分析

调用方可以在回路之间、查询向量之间自行并行，本模块的函数都是纯函数
"""

import logging
from enum import Enum
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import null_space, svd
from scipy.optimize import least_squares

from .config import Config, get_config
from .core.chain import (Chain, DerivativeStack, closure_residual, jacobian_spatial,
                         joint_screws_spatial, kinematic_map)
from .core.derivatives import chainwise_derivatives
from .core.screw import screw_bracket
from .errors import ClosureViolationError, DerivativeOrderError, ModelError
from .minors import MinorIndex, all_minor_indices, minor_derivatives
from .taylor import PolySystem, cspace_poly_system, homogeneous_coefficients, screw_differentials

logger = logging.getLogger(__name__)


# ==================== 回路系统 ====================

@dataclass(frozen=True, eq=False)
class LoopSpec:
    """
    单个基本回路

    Args:
        chain: 回路对应的闭链（f_n(q) = I）
        indices: 第 j 个关节对应的全局变量序号（0 起）
        signs: 第 j 个关节变量与全局变量的符号关系（反向遍历为 −1）
    """
    chain: Chain
    indices: Tuple[int, ...]
    signs: Tuple[float, ...]

    def __post_init__(self):
        indices = tuple(int(i) for i in self.indices)
        signs = tuple(float(s) for s in self.signs)
        if len(indices) != self.chain.n or len(signs) != self.chain.n:
            raise ModelError(f"回路 {self.chain.name} 的索引/符号数量与关节数 {self.chain.n} 不一致")
        if len(set(indices)) != len(indices):
            raise ModelError(f"回路 {self.chain.name} 的全局索引重复: {indices}")
        if any(s not in (1.0, -1.0) for s in signs):
            raise ModelError(f"回路 {self.chain.name} 的符号只能是 ±1: {signs}")
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "signs", signs)

    def local(self, arr: np.ndarray) -> np.ndarray:
        """全局数组（最后一维为全局变量）到本回路变量"""
        return arr[..., list(self.indices)] * np.array(self.signs)

    def local_stack(self, stack: DerivativeStack) -> DerivativeStack:
        arr = self.local(stack.as_array())
        return DerivativeStack(arr[0], tuple(arr[1:]))


@dataclass(frozen=True, eq=False)
class LoopSystem:
    """共享全局关节变量的多回路系统"""
    loops: Tuple[LoopSpec, ...]
    n_global: int

    def __post_init__(self):
        loops = tuple(self.loops)
        if not loops:
            raise ModelError("回路系统至少需要一个回路")
        used = set()
        for loop in loops:
            if any(not 0 <= i < self.n_global for i in loop.indices):
                raise ModelError(f"回路 {loop.chain.name} 的索引超出全局变量数 {self.n_global}")
            used.update(loop.indices)
        missing = sorted(set(range(self.n_global)) - used)
        if missing:
            raise ModelError(f"全局变量未被任何回路引用: {[i + 1 for i in missing]}")
        object.__setattr__(self, "loops", loops)

    @classmethod
    def single(cls, chain: Chain) -> "LoopSystem":
        return cls((LoopSpec(chain, tuple(range(chain.n)), (1.0,) * chain.n),), chain.n)

    @classmethod
    def from_model(cls, model) -> "LoopSystem":
        """由模型文件构造，见 models.load_model"""
        from .models import loop_system_from_model

        return loop_system_from_model(model)

    @property
    def n_loops(self) -> int:
        return len(self.loops)

    @property
    def characteristic_length(self) -> float:
        return max(loop.chain.characteristic_length for loop in self.loops)

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.n_global:
            raise ModelError(f"关节变量长度 {q.shape[0]} 与全局变量数 {self.n_global} 不一致")
        return q

    def jacobian(self, q) -> np.ndarray:
        """各回路空间雅可比按行堆叠，形状 (6L, n_global)"""
        q = self.check_q(q)
        J = np.zeros((6 * self.n_loops, self.n_global))
        for l, loop in enumerate(self.loops):
            Jl = jacobian_spatial(loop.chain, loop.local(q))
            for j, (g, s) in enumerate(zip(loop.indices, loop.signs)):
                J[6 * l:6 * l + 6, g] += s * Jl[:, j]
        return J

    def closure_residuals(self, q) -> np.ndarray:
        q = self.check_q(q)
        return np.array([closure_residual(loop.chain, loop.local(q)) for loop in self.loops])

    def closure_vector(self, q) -> np.ndarray:
        """各回路 f_n(q) − I 上 3×4 块展平后拼接"""
        q = self.check_q(q)
        parts = [(kinematic_map(loop.chain, loop.local(q)).matrix - np.eye(4))[:3].ravel()
                 for loop in self.loops]
        return np.concatenate(parts)

    def constraint_maps(self, state: DerivativeStack, k: int) -> np.ndarray:
        """堆叠的 H^(1..k)，形状 (k, 6L)"""
        if state.n != self.n_global:
            raise ModelError(f"导数栈长度 {state.n} 与全局变量数 {self.n_global} 不一致")
        return np.concatenate([loop_constraint_map(loop.chain, loop.local_stack(state), k)
                               for loop in self.loops], axis=1)


LoopLike = Union[Chain, LoopSystem]


def as_loop_system(loops: LoopLike) -> LoopSystem:
    return LoopSystem.single(loops) if isinstance(loops, Chain) else loops


def check_closure(system: LoopSystem, q, config: Optional[Config] = None) -> None:
    config = config or get_config()
    res = float(np.max(system.closure_residuals(q)))
    if res >= config.tolerances.tol_loop:
        raise ClosureViolationError(
            f"构型不满足闭环约束: ‖f(q) − I‖ = {res:.3e} ≥ {config.tolerances.tol_loop:.1e}", res)


# ==================== 约束映射 ====================

def loop_constraint_map(loop: Chain, state: DerivativeStack, k: int) -> np.ndarray:
    """
    H^(i) = D^(i−1)𝖲_n，i = 1..k

    Returns:
        形状 (k, 6)，第 i−1 行为 H^(i)
    """
    if k < 1:
        raise DerivativeOrderError(f"约束映射阶数至少为 1: {k}")
    state.require(k)
    stack = state.truncated(k)
    _, dV = chainwise_derivatives(joint_screws_spatial(loop, stack.q), stack.as_array())
    return dV[:, -1]


# ==================== 切锥 ====================

class ConeVerdict(Enum):
    """切锥判定"""
    MEMBER = "member"
    NON_MEMBER = "non_member"
    UNDECIDED = "undecided"


@dataclass(eq=False)
class ConeResult:
    """
    切锥判定结果

    verdicts[i-1]、residuals[i-1] 对应第 i 阶；certified[i-1] 表示该阶的判定有证书
    （线性可行性的精确最小二乘，或找到的解）
    """
    x: np.ndarray
    order: int
    kernel_basis: np.ndarray
    verdicts: List[ConeVerdict] = field(default_factory=list)
    residuals: List[float] = field(default_factory=list)
    certified: List[bool] = field(default_factory=list)
    tolerance: float = 0.0
    solution: Optional[np.ndarray] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def member(self) -> bool:
        return all(v is ConeVerdict.MEMBER for v in self.verdicts)

    @property
    def max_member_order(self) -> int:
        order = 0
        for v in self.verdicts:
            if v is not ConeVerdict.MEMBER:
                break
            order += 1
        return order

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "order": self.order,
            "tolerance": self.tolerance,
            "kernel_basis": self.kernel_basis.T.tolist(),
            "verdicts": [v.value for v in self.verdicts],
            "residuals": [r if np.isfinite(r) else None for r in self.residuals],
            "certified": list(self.certified),
        }


# 约束关于未知高阶导数仿射的最高阶数
AFFINE_MAX_ORDER = 3


def _solve_stage(F: Callable[[np.ndarray], np.ndarray], dim: int, affine: bool,
                 start: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    求 min ‖F(u)‖；仿射时按基向量探测系数后精确最小二乘，否则用 trf 下降
    """
    if dim == 0:
        u = np.zeros(0)
        return float(np.max(np.abs(F(u)), initial=0.0)), u
    if affine:
        b = F(np.zeros(dim))
        A = np.column_stack([F(e) - b for e in np.eye(dim)])
        u = np.linalg.lstsq(A, -b, rcond=None)[0]
    else:
        sol = least_squares(F, start, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=200 * (dim + 1))
        u = sol.x
    return float(np.max(np.abs(F(u)), initial=0.0)), u


def _sequential_feasibility(residual_fn: Callable[[np.ndarray, int], np.ndarray], n: int,
                            max_order: int, tol: float) -> Tuple[List[ConeVerdict], List[float],
                                                                 List[bool], Optional[np.ndarray]]:
    """
    逐阶可行性判定

    residual_fn(u, i): 未知量 u = (y2, …, y_i) 拼接时 1..i 阶约束的残差
    """
    verdicts: List[ConeVerdict] = []
    residuals: List[float] = []
    certified: List[bool] = []
    u = np.zeros(0)
    failed = False
    for i in range(1, max_order + 1):
        if failed:
            verdicts.append(ConeVerdict.NON_MEMBER)
            residuals.append(float("inf"))
            certified.append(True)
            continue
        dim = (i - 1) * n
        affine = i <= AFFINE_MAX_ORDER
        start = np.concatenate([u, np.zeros(dim - u.size)])
        res, sol = _solve_stage(lambda v, i=i: residual_fn(v, i), dim, affine, start)
        residuals.append(res)
        if res < tol:
            verdicts.append(ConeVerdict.MEMBER)
            certified.append(True)
            u = sol
            # 高阶的解同时满足全部低阶约束
            for j, v in enumerate(verdicts):
                if v is ConeVerdict.UNDECIDED:
                    verdicts[j] = ConeVerdict.MEMBER
                    certified[j] = True
        elif affine:
            verdicts.append(ConeVerdict.NON_MEMBER)
            certified.append(True)
            failed = True
        else:
            verdicts.append(ConeVerdict.UNDECIDED)
            certified.append(False)
            u = start
    return verdicts, residuals, certified, (u if u.size else None)


def _stack_from_unknowns(q: np.ndarray, x: np.ndarray, u: np.ndarray, i: int) -> DerivativeStack:
    n = q.shape[0]
    ys = [u[l * n:(l + 1) * n] for l in range(i - 1)]
    return DerivativeStack(q, (x, *ys))


def kernel_basis(system: LoopSystem, q, config: Optional[Config] = None) -> Tuple[np.ndarray, bool]:
    """
    K¹ = ker J 的正交基，以及秩判定是否病态（奇异值间隙 < gap_warn）
    """
    config = config or get_config()
    J = system.jacobian(q)
    rank, ill = numeric_rank(J, config)
    _, _, Vt = svd(J)
    return Vt[rank:].T.copy(), ill


def numeric_rank(A: np.ndarray, config: Optional[Config] = None) -> Tuple[int, bool]:
    """相对 σ_max 的 SVD 秩；间隙 σ_r/σ_{r+1} < gap_warn 时标记病态"""
    tol = (config or get_config()).tolerances
    sv = svd(A, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0, False
    rank = int(np.sum(sv > tol.rank_rel * sv[0]))
    ill = False
    if 0 < rank < sv.size:
        ill = sv[rank - 1] / max(sv[rank], np.finfo(float).tiny) < tol.gap_warn
    return rank, bool(ill)


def tangent_cone_membership(loops: LoopLike, q, x, max_order: int,
                            config: Optional[Config] = None) -> ConeResult:
    """
    判定 x 是否属于 i 阶运动学切锥 K_q^i，i = 1..max_order

    一阶检验 x ∈ ker J；i ≥ 2 时 H^(i) 关于最高阶未知量线性（系数为 J），
    对低阶未知量的可行族联合求最小二乘。三阶以内约束关于未知量仿射，
    判定有证书；四阶及以上用非线性最小二乘，找不到解时记为 UNDECIDED

    Raises:
        ClosureViolationError: q 不在闭环构型上
    """
    config = config or get_config()
    system = as_loop_system(loops)
    q = system.check_q(q)
    x = system.check_q(x)
    check_closure(system, q, config)
    if max_order > config.k_max:
        raise DerivativeOrderError(f"阶数 {max_order} 超过上限 k_max = {config.k_max}")
    tol = config.tolerances.cone(system.characteristic_length)

    def residual_fn(u, i):
        return system.constraint_maps(_stack_from_unknowns(q, x, u, i), i).ravel()

    verdicts, residuals, certified, sol = _sequential_feasibility(residual_fn, system.n_global,
                                                                   max_order, tol)
    basis, ill = kernel_basis(system, q, config)
    result = ConeResult(x=x, order=max_order, kernel_basis=basis, verdicts=verdicts,
                        residuals=residuals, certified=certified, tolerance=tol, solution=sol)
    _collect_warnings(result, ill)
    return result


def _collect_warnings(result: ConeResult, ill: bool) -> None:
    if ill:
        result.warnings.append("雅可比秩判定病态（奇异值间隙过小）")
    if ConeVerdict.UNDECIDED in result.verdicts:
        result.warnings.append(
            f"第 {result.verdicts.index(ConeVerdict.UNDECIDED) + 1} 阶起无法判定（非线性可行性未找到解）")
    for w in result.warnings:
        logger.warning(w)


# ==================== 闭包代数 ====================

@dataclass(frozen=True, eq=False)
class ClosureAlgebra:
    """
    螺旋系统的 Lie 闭包代数

    basis: 6×g 正交基；generations: 实际使用的括号深度
    """
    basis: np.ndarray
    g: int
    generations: int
    singular_values: np.ndarray
    ill_conditioned: bool = False

    def residual(self, X) -> float:
        """X 在张成空间外的分量范数"""
        X = np.asarray(X, dtype=float)
        return float(np.linalg.norm(X - self.basis @ (self.basis.T @ X)))

    def bracket_residual(self) -> float:
        """基向量两两括号投影残差的最大值"""
        worst = 0.0
        for a in range(self.g):
            for b in range(a + 1, self.g):
                worst = max(worst, self.residual(screw_bracket(self.basis[:, a], self.basis[:, b])))
        return worst

    def to_dict(self) -> dict:
        return {"g": self.g, "generations": self.generations,
                "ill_conditioned": self.ill_conditioned,
                "singular_values": self.singular_values.tolist()}


# 闭包最多需要三重括号
MAX_BRACKET_DEPTH = 3


def _span(columns: np.ndarray, rank_rel: float) -> Tuple[np.ndarray, np.ndarray]:
    U, sv, _ = svd(columns, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros((6, 0)), sv
    rank = int(np.sum(sv > rank_rel * sv[0]))
    return U[:, :rank], sv


def closure_algebra(screws, config: Optional[Config] = None) -> ClosureAlgebra:
    """
    由螺旋张成空间出发，反复用种子螺旋作括号扩充，直到秩不再增加

    Args:
        screws: 形状 (m, 6) 的种子螺旋
    """
    tol = (config or get_config()).tolerances
    seeds = np.atleast_2d(np.asarray(screws, dtype=float))
    if seeds.shape[0] == 0:
        raise ModelError("闭包代数至少需要一个螺旋")
    norms = np.linalg.norm(seeds, axis=1)
    seeds = seeds[norms > 0]
    if seeds.shape[0] == 0:
        raise ModelError("种子螺旋全为零")
    basis, sv = _span(seeds.T, tol.rank_rel)
    depth = 0
    for depth in range(1, MAX_BRACKET_DEPTH + 1):
        brackets = [screw_bracket(s, basis[:, a]) for s in seeds for a in range(basis.shape[1])]
        grown, sv = _span(np.column_stack([basis, *brackets]), tol.rank_rel)
        if grown.shape[1] == basis.shape[1]:
            break
        basis = grown
    g = basis.shape[1]
    ill = bool(g < sv.size and sv[g] > 0 and sv[g - 1] / sv[g] < tol.gap_warn)
    if ill:
        logger.warning("闭包代数秩判定病态: σ_g/σ_(g+1) = %.3e", sv[g - 1] / sv[g])
    logger.debug("闭包代数维数 g=%d，括号深度 %d", g, depth)
    return ClosureAlgebra(basis=basis, g=g, generations=depth, singular_values=sv, ill_conditioned=ill)


# ==================== CKG 自由度 ====================

@dataclass(eq=False)
class CKGResult:
    """
    结构自由度 δ_str = Σf_i − Σg_l

    generic_dof: 在 q 附近闭环构型上数值估计的局部自由度（给定 q 时）；
    paradoxical_candidate: generic_dof > δ_str，CKG 公式可能低估
    """
    delta: int
    n_joints: int
    g: List[int]
    algebras: List[ClosureAlgebra]
    generic_dof: Optional[int] = None
    paradoxical_candidate: bool = False
    warnings: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "delta_str": self.delta,
            "n_joints": self.n_joints,
            "g": list(self.g),
            "algebras": [a.to_dict() for a in self.algebras],
            "generic_dof": self.generic_dof,
            "paradoxical_candidate": self.paradoxical_candidate,
        }


def ckg_mobility(loops: LoopLike, q=None, config: Optional[Config] = None,
                 samples: int = 5, rng: Optional[np.random.Generator] = None) -> CKGResult:
    """
    CKG 结构自由度，每个基本回路取参考螺旋的闭包代数维数

    给定闭环构型 q 时再估计局部自由度：沿 ker J 随机方向小步移动并投影回闭环，
    取各样本点处 n − rank J 的最小值
    """
    config = config or get_config()
    system = as_loop_system(loops)
    algebras = [closure_algebra(loop.chain.screws, config) for loop in system.loops]
    g = [a.g for a in algebras]
    delta = system.n_global - sum(g)
    result = CKGResult(delta=delta, n_joints=system.n_global, g=g, algebras=algebras)
    if any(a.ill_conditioned for a in algebras):
        result.warnings.append("闭包代数秩判定病态")
    if q is not None:
        result.generic_dof = generic_local_dof(system, q, config, samples, rng)
        if result.generic_dof > delta:
            result.paradoxical_candidate = True
            result.warnings.append(
                f"局部自由度 {result.generic_dof} 大于 δ_str = {delta}，CKG 公式可能低估（过约束机构）")
    for w in result.warnings:
        logger.warning(w)
    return result


def project_to_closure(loops: LoopLike, q, config: Optional[Config] = None) -> np.ndarray:
    """从 q 出发做最小二乘，返回附近的闭环构型"""
    config = config or get_config()
    system = as_loop_system(loops)
    q = system.check_q(q)
    sol = least_squares(system.closure_vector, q, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15)
    res = float(np.max(system.closure_residuals(sol.x)))
    if res >= config.tolerances.tol_loop:
        raise ClosureViolationError(f"投影到闭环构型失败: 残差 {res:.3e}", res)
    return sol.x


def generic_local_dof(loops: LoopLike, q, config: Optional[Config] = None, samples: int = 5,
                      rng: Optional[np.random.Generator] = None, step: float = 0.1) -> int:
    config = config or get_config()
    system = as_loop_system(loops)
    q = system.check_q(q)
    check_closure(system, q, config)
    rng = rng or np.random.default_rng(0)
    basis, _ = kernel_basis(system, q, config)
    best = system.n_global - numeric_rank(system.jacobian(q), config)[0]
    if basis.shape[1] == 0:
        return best
    for _ in range(samples):
        direction = basis @ rng.standard_normal(basis.shape[1])
        direction /= np.linalg.norm(direction)
        try:
            qs = project_to_closure(system, q + step * direction, config)
        except ClosureViolationError:
            continue
        best = min(best, system.n_global - numeric_rank(system.jacobian(qs), config)[0])
    return best


def reduction_matrix(loops: LoopLike, config: Optional[Config] = None) -> np.ndarray:
    """各回路 Ū_l 组成的块对角阵，形状 (Σg, 6L)"""
    system = as_loop_system(loops)
    blocks = []
    for loop in system.loops:
        algebra = closure_algebra(loop.chain.screws, config)
        U, _, _ = svd(algebra.basis)
        blocks.append(U[:, :algebra.g].T)
    out = np.zeros((sum(b.shape[0] for b in blocks), 6 * system.n_loops))
    row = 0
    for l, block in enumerate(blocks):
        out[row:row + block.shape[0], 6 * l:6 * l + 6] = block
        row += block.shape[0]
    return out


def reduce_constraints(loop: Chain, q, config: Optional[Config] = None) -> np.ndarray:
    """
    J̄ = Ū J，Ū 为闭包基 SVD 中 U 的前 g 列转置；形状 g×n，秩与 J 相同
    """
    return reduction_matrix(loop, config) @ jacobian_spatial(loop, q)


# ==================== 秩分层 ====================

@dataclass(eq=False)
class StratumMaps:
    """
    给定导数栈上的 H^(i) 与 k 阶子式的 M^(i)

    H[i-1] = H^(i)，M[i-1, r] = 第 r 个子式的 i 阶时间导数
    """
    k_rank: int
    indices: List[MinorIndex]
    H: np.ndarray
    M: np.ndarray

    @property
    def max_residual(self) -> float:
        return float(max(np.max(np.abs(self.H), initial=0.0), np.max(np.abs(self.M), initial=0.0)))


def rank_stratum_maps(loop: Chain, state: DerivativeStack, k_rank: int, nu: int) -> StratumMaps:
    """对全部 |α|=|β|=k_rank 的子式计算 M^(i)，i = 1..ν，以及 H^(1..ν)"""
    if not 1 <= k_rank <= min(6, loop.n):
        raise ModelError(f"子式阶数 {k_rank} 超出 1..{min(6, loop.n)}")
    state.require(nu)
    indices = list(all_minor_indices(loop.n, k_rank))
    stack = state.truncated(nu)
    dS, dV = chainwise_derivatives(joint_screws_spatial(loop, stack.q), stack.as_array())
    M = np.array([minor_derivatives(dS, indices, i) for i in range(1, nu + 1)])
    return StratumMaps(k_rank=k_rank, indices=indices, H=dV[:, -1], M=M)


def stratum_cone_membership(loop: Chain, q, x, k_rank: int, max_order: int,
                            config: Optional[Config] = None) -> ConeResult:
    """
    K_q^{k,i} 的判定：约束方程 H^(1..i) 加上全部 k 阶子式的 M^(1..i)

    M^(i) 在三阶以内关于未知高阶导数仿射，判定方式同 tangent_cone_membership
    """
    config = config or get_config()
    q = loop.check_q(q)
    x = loop.check_q(x)
    system = LoopSystem.single(loop)
    check_closure(system, q, config)
    tol = config.tolerances.cone(loop.characteristic_length)

    def residual_fn(u, i):
        maps = rank_stratum_maps(loop, _stack_from_unknowns(q, x, u, i), k_rank, i)
        return np.concatenate([maps.H.ravel(), maps.M.ravel()])

    verdicts, residuals, certified, sol = _sequential_feasibility(residual_fn, loop.n, max_order, tol)
    basis = stratum_first_order_basis(loop, q, k_rank, config)
    result = ConeResult(x=x, order=max_order, kernel_basis=basis, verdicts=verdicts,
                        residuals=residuals, certified=certified, tolerance=tol, solution=sol)
    _collect_warnings(result, numeric_rank(jacobian_spatial(loop, q), config)[1])
    return result


def first_order_minor_rows(loop: Chain, q, k_rank: int) -> np.ndarray:
    """dm_{αβ}(x) 关于 x 线性，返回系数矩阵（每个子式一行）"""
    indices = list(all_minor_indices(loop.n, k_rank))
    S = joint_screws_spatial(loop, q)
    rows = np.empty((len(indices), loop.n))
    for j, e in enumerate(np.eye(loop.n)):
        rows[:, j] = minor_derivatives(screw_differentials(S, e, 1), indices, 1)
    return rows


def stratum_first_order_basis(loop: Chain, q, k_rank: int,
                              config: Optional[Config] = None) -> np.ndarray:
    """K^{k,1} = ker [J; ∇m] 的正交基"""
    config = config or get_config()
    A = np.vstack([jacobian_spatial(loop, q), first_order_minor_rows(loop, q, k_rank)])
    return null_space(A, rcond=config.tolerances.rank_rel)


def local_stratum_poly_system(loop: Chain, q, k_rank: int, K: int,
                              config: Optional[Config] = None) -> PolySystem:
    """
    L_k 的 K 阶局部近似：c-空间方程组加上全部 k 阶子式的截断级数 Σ_{i≤K} dⁱm/i!
    """
    config = config or get_config()
    system = cspace_poly_system(loop, q, K, config)
    if K == 0:
        return system
    indices = list(all_minor_indices(loop.n, k_rank))
    S = joint_screws_spatial(loop, q)
    memo: dict = {}

    def differentials(c):
        key = tuple(c)
        if key not in memo:
            memo[key] = screw_differentials(S, c, K)
        return memo[key]

    polys = [dict() for _ in indices]
    base = minor_derivatives(S[None], indices, 0)
    for r, value in enumerate(base):
        polys[r][(0,) * loop.n] = float(value)
    fact = 1.0
    for i in range(1, K + 1):
        fact *= i
        coeffs = homogeneous_coefficients(
            lambda c, i=i: minor_derivatives(differentials(c), indices, i), loop.n, i)
        for mono, values in coeffs.items():
            for r, value in enumerate(values):
                polys[r][mono] = polys[r].get(mono, 0.0) + value / fact
    for idx, poly in zip(indices, polys):
        system.add(poly, f"m{idx.alpha}{idx.beta}", config.tolerances.zero_coeff)
    logger.debug("秩分层方程组: %d 个方程", len(system.equations))
    return system
