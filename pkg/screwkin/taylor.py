"""
运动学映射的高阶微分与 Taylor 展开
以及 c-空间局部近似的多项式方程组

对方向 x，dᵏf_q(x) 等于 dᵏ/dtᵏ f(q + t x) 在 t = 0 处的值
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import polar, svd
from scipy.optimize import least_squares

from .config import Config, get_config
from .core.chain import Chain, closure_residual, forward_poses, joint_screws_spatial
from .core.multiindex import MultiIndex, binomial, compositions
from .core.screw import hat, screw_bracket
from .errors import ClosureViolationError, DerivativeOrderError, check_index

logger = logging.getLogger(__name__)


# ==================== 螺旋微分 ====================

def screw_differentials(S: np.ndarray, x: np.ndarray, k: int) -> np.ndarray:
    """
    dˡS_i(x)，l = 0..k

    dᵏS_i = Σ_{j<i} Σ_{l<k} C(k−1, l) [dˡS_j, d^{k−l−1}S_i] x_j

    Returns:
        形状 (k+1, n, 6)
    """
    n = S.shape[0]
    dS = np.zeros((k + 1, n, 6))
    dS[0] = S
    # acc[l] = Σ_{j<i} dˡS_j x_j
    acc = np.zeros((k + 1, 6))
    for i in range(n):
        for order in range(1, k + 1):
            v = np.zeros(6)
            for l in range(order):
                v += binomial(order - 1, l) * screw_bracket(acc[l], dS[order - l - 1, i])
            dS[order, i] = v
        acc += dS[:, i] * x[i]
    return dS


def screw_differential(chain: Chain, q, i: int, k: int, x) -> np.ndarray:
    """dᵏS_{i,q}(x)，d⁰ 为 S_i(q)"""
    check_index(i, chain.n)
    if k < 0:
        raise DerivativeOrderError(f"微分阶数不能为负: {k}")
    x = chain.check_q(x)
    return screw_differentials(joint_screws_spatial(chain, q), x, k)[k, i - 1]


def screw_differential_explicit(chain: Chain, q, i: int, k: int, x) -> np.ndarray:
    """
    显式多重指数求和 Σ_{|a|=k} (k!/a!) xᵃ ∂ᵃS_i，仅作对照
    """
    from .core.derivatives import partial_screw

    x = chain.check_q(x)
    if k == 0:
        return joint_screws_spatial(chain, q)[i - 1]
    total = np.zeros(6)
    for a in compositions(k, i - 1):
        mi = MultiIndex(a + (0,) * (chain.n - i + 1))
        total += mi.multinomial() * mi.monomial(x) * partial_screw(chain, q, i, mi)
    return total


# ==================== 运动学映射微分 ====================

@dataclass(frozen=True, eq=False)
class KMDifferentials:
    """
    在方向 x 上求值的各阶微分

    df[k] = dᵏf_q(x)，dfinv[k] = dᵏf_q⁻¹(x)，h[k] = h_q^(k)(x)（h[0] 为零），
    dS[k, i-1] = dᵏS_{i,q}(x)
    """
    x: np.ndarray
    df: np.ndarray
    dfinv: np.ndarray
    h: np.ndarray
    dS: np.ndarray

    @property
    def order(self) -> int:
        return self.df.shape[0] - 1


def km_differentials(chain: Chain, q, k_max: int, x, config: Optional[Config] = None) -> KMDifferentials:
    """
    联合递推 dᵏf、dᵏf⁻¹、h^(k)

        h^(k)(x) = Σ_i x_i d^{k−1}Ŝ_i(x)
        dᵏf = (h^(k) − Σ_{m=1}^{k−1} C(k−1, m−1) dᵐf d^{k−m}f⁻¹) f
        dᵏf⁻¹ = −f⁻¹ Σ_{i=1}^{k} C(k, i) dⁱf d^{k−i}f⁻¹
    """
    config = config or get_config()
    if k_max > config.k_max:
        raise DerivativeOrderError(f"阶数 {k_max} 超过上限 k_max = {config.k_max}")
    x = chain.check_q(x)
    fn = forward_poses(chain, q)[-1]
    f, finv = fn.matrix, fn.inverse().matrix
    dS = screw_differentials(joint_screws_spatial(chain, q), x, max(k_max - 1, 0))

    df = np.zeros((k_max + 1, 4, 4))
    dfinv = np.zeros((k_max + 1, 4, 4))
    h = np.zeros((k_max + 1, 4, 4))
    df[0], dfinv[0] = f, finv
    for k in range(1, k_max + 1):
        h[k] = hat(np.einsum("i,ij->j", x, dS[k - 1]))
        M = h[k].copy()
        for m in range(1, k):
            M -= binomial(k - 1, m - 1) * df[m] @ dfinv[k - m]
        df[k] = M @ f
        acc = np.zeros((4, 4))
        for i in range(1, k + 1):
            acc += binomial(k, i) * df[i] @ dfinv[k - i]
        dfinv[k] = -finv @ acc
    return KMDifferentials(x=x, df=df, dfinv=dfinv, h=h, dS=dS)


def km_differentials_leibniz(chain: Chain, q, k_max: int, x) -> np.ndarray:
    """
    另一种递推 dᵏf = Σ_{m<k} C(k−1, m) h^(m+1) d^{k−1−m}f（由 ġ = H g 得到），仅作对照
    """
    x = chain.check_q(x)
    f = forward_poses(chain, q)[-1].matrix
    dS = screw_differentials(joint_screws_spatial(chain, q), x, max(k_max - 1, 0))
    hs = [hat(np.einsum("i,ij->j", x, dS[m])) for m in range(k_max)]
    df = np.zeros((k_max + 1, 4, 4))
    df[0] = f
    for k in range(1, k_max + 1):
        for m in range(k):
            df[k] += binomial(k - 1, m) * hs[m] @ df[k - 1 - m]
    return df


def h2_explicit(chain: Chain, q, x) -> np.ndarray:
    """h^(2)(x) = Σ_{j<i} x_i x_j ad_{S_j} S_i 的 hat 形式"""
    x = chain.check_q(x)
    S = joint_screws_spatial(chain, q)
    v = np.zeros(6)
    for i in range(chain.n):
        for j in range(i):
            v += x[i] * x[j] * screw_bracket(S[j], S[i])
    return hat(v)


def km_taylor_eval(chain: Chain, q, K: int, x, config: Optional[Config] = None) -> np.ndarray:
    """
    f(q) + Σ_{k=1..K} dᵏf_q(x)/k!

    结果是 4×4 矩阵近似，不保证在 SE(3) 内
    """
    d = km_differentials(chain, q, K, x, config)
    total = np.zeros((4, 4))
    fact = 1.0
    for k in range(K + 1):
        if k:
            fact *= k
        total += d.df[k] / fact
    return total


def project_to_se3(M: np.ndarray) -> np.ndarray:
    """把 4×4 近似投影回 SE(3)：旋转块取极分解的正交因子"""
    M = np.asarray(M, dtype=float)
    U, _ = polar(M[:3, :3])
    if np.linalg.det(U) < 0:
        U = -U
    out = np.eye(4)
    out[:3, :3] = U
    out[:3, 3] = M[:3, 3]
    return out


# ==================== 多项式方程组 ====================

Polynomial = Dict[Tuple[int, ...], float]


@dataclass
class PolySystem:
    """
    多项式方程组，每个方程是 {单项式指数: 系数}

    Args:
        variables: 变量名
        equations: 方程列表
        labels: 方程来源说明（矩阵元素或子式）
    """
    variables: List[str]
    equations: List[Polynomial] = field(default_factory=list)
    labels: List[str] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.variables)

    def add(self, poly: Polynomial, label: str = "", zero_tol: float = 1e-12) -> bool:
        """加入方程，丢弃零系数单项式；全零方程不加入，返回是否加入"""
        cleaned = {m: float(c) for m, c in poly.items() if abs(c) >= zero_tol}
        if not cleaned:
            return False
        self.equations.append(cleaned)
        self.labels.append(label)
        return True

    def extend(self, other: "PolySystem") -> "PolySystem":
        self.equations.extend(other.equations)
        self.labels.extend(other.labels)
        return self

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([sum(c * np.prod(x ** np.array(m)) for m, c in eq.items())
                         for eq in self.equations])

    def jacobian(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        Jac = np.zeros((len(self.equations), self.n))
        for r, eq in enumerate(self.equations):
            for m, c in eq.items():
                for j, aj in enumerate(m):
                    if aj == 0:
                        continue
                    e = np.array(m)
                    e[j] -= 1
                    Jac[r, j] += c * aj * np.prod(x ** e)
        return Jac

    def to_text(self) -> str:
        """每行一个方程，单项式写作 coeff*x1^a1*...*xn^an"""
        lines = []
        for eq in self.equations:
            terms = []
            for m, c in sorted(eq.items(), key=lambda t: (sum(t[0]), tuple(-v for v in t[0]))):
                factors = [f"{c:.17g}"]
                factors += [f"{self.variables[j]}^{aj}" if aj > 1 else self.variables[j]
                            for j, aj in enumerate(m) if aj]
                terms.append("*".join(factors))
            lines.append(" + ".join(terms).replace("+ -", "- "))
        return "\n".join(lines) + ("\n" if lines else "")


def homogeneous_coefficients(evaluate, n: int, degree: int, cache: Optional[dict] = None) -> Dict[Tuple[int, ...], np.ndarray]:
    """
    由整数格点上的取值恢复 degree 次齐次部分的系数

    对 |a| = k: coeff(xᵃ) = (1/a!) Σ_{c≤a} (−1)^{k−|c|} Π C(a_j, c_j) p_k(c)

    Args:
        evaluate: c ↦ p_k(c)（数组值），只在 |c| ≤ degree 的整数点调用
    """
    cache = {} if cache is None else cache

    def value(c):
        if c not in cache:
            cache[c] = np.asarray(evaluate(np.array(c, dtype=float)))
        return cache[c]

    coeffs = {}
    for a in compositions(degree, n):
        support = [j for j, v in enumerate(a) if v]
        total = None
        for sub in _sub_indices([a[j] for j in support]):
            c = [0] * n
            weight = 1
            for j, cj in zip(support, sub):
                c[j] = cj
                weight *= binomial(a[j], cj)
            sign = -1 if (degree - sum(sub)) % 2 else 1
            term = sign * weight * value(tuple(c))
            total = term if total is None else total + term
        coeffs[a] = total / MultiIndex(a).factorial
    return coeffs


def _sub_indices(bounds: Sequence[int]):
    if not bounds:
        yield ()
        return
    for c0 in range(bounds[0] + 1):
        for rest in _sub_indices(bounds[1:]):
            yield (c0,) + rest


def _check_closure(chain: Chain, q, tol: float) -> None:
    res = closure_residual(chain, q)
    if res >= tol:
        raise ClosureViolationError(f"构型不满足闭环约束: ‖f_n(q) − I‖ = {res:.3e} ≥ {tol:.1e}", res)


def cspace_poly_system(chain: Chain, q, K: int, config: Optional[Config] = None) -> PolySystem:
    """
    c-空间 K 阶局部近似 Σ_{k≤K} dᵏf_q(x)/k! = 0 的多项式方程组

    取 4×4 矩阵上 3×4 块的 12 个元素，丢弃恒为零的方程
    """
    config = config or get_config()
    tol = config.tolerances
    _check_closure(chain, q, tol.tol_loop)
    n = chain.n
    memo: dict = {}

    def all_orders(c):
        key = tuple(c)
        if key not in memo:
            memo[key] = km_differentials(chain, q, K, c, config).df
        return memo[key]

    poly: Dict[Tuple[int, int], Polynomial] = {(r, c): {} for r in range(3) for c in range(4)}
    fact = 1.0
    for k in range(1, K + 1):
        fact *= k
        coeffs = homogeneous_coefficients(lambda c, k=k: all_orders(c)[k], n, k)
        for mono, M in coeffs.items():
            for (r, c), p in poly.items():
                p[mono] = p.get(mono, 0.0) + M[r, c] / fact

    system = PolySystem([f"x{j + 1}" for j in range(n)])
    for (r, c), p in poly.items():
        system.add(p, f"f[{r + 1},{c + 1}]", tol.zero_coeff)
    logger.debug("c-空间 %d 阶方程组: %d 个方程", K, len(system.equations))
    return system


# ==================== 数值探测 ====================

@dataclass
class VarietyProbe:
    """零点集的数值探测结果"""
    points: List[np.ndarray]
    ranks: List[int]
    dimension: Optional[int]
    residuals: List[float]


def sample_variety(system: PolySystem, seeds: int = 20, scale: float = 0.3,
                   rng: Optional[np.random.Generator] = None, rank_rel: float = 1e-8,
                   residual_tol: float = 1e-10) -> VarietyProbe:
    """
    从随机起点做最小二乘下降到零点集，在找到的点上计算方程组雅可比的秩

    维数估计取 n − 最常见的秩；不作代数证明
    """
    rng = rng or np.random.default_rng(0)
    points, ranks, residuals = [], [], []
    if not system.equations:
        return VarietyProbe([], [], system.n, [])
    for _ in range(seeds):
        x0 = scale * rng.standard_normal(system.n)
        sol = least_squares(system.evaluate, x0, jac=system.jacobian, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        res = float(np.max(np.abs(system.evaluate(sol.x))))
        if res > residual_tol:
            continue
        sv = svd(system.jacobian(sol.x), compute_uv=False)
        rank = int(np.sum(sv > rank_rel * max(sv[0], 1.0))) if sv.size else 0
        points.append(sol.x)
        ranks.append(rank)
        residuals.append(res)
    dimension = None
    if ranks:
        values, counts = np.unique(ranks, return_counts=True)
        dimension = system.n - int(values[np.argmax(counts)])
    return VarietyProbe(points, ranks, dimension, residuals)
