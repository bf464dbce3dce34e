"""
雅可比子式及其任意阶时间导数与微分

dᵛ/dtᵛ m_{αβ} = Σ_{|a|=ν} (ν!/a!) det(S^(a_1)_{αβ_1} ··· S^(a_k)_{αβ_k})
求和取遍 ν 的全部 k 元组合（星与条），项数 C(ν+k−1, k−1)
"""

import logging
import warnings
from itertools import combinations
from math import factorial
from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor

from .core.chain import Chain, DerivativeStack, jacobian_spatial, joint_screws_spatial
from .core.derivatives import screw_time_derivatives
from .core.multiindex import MultiIndex, compositions
from .taylor import screw_differentials
from .errors import ModelError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MinorIndex:
    """行集 α ⊆ {1..6}、列集 β ⊆ {1..n}，均严格递增且等长"""
    alpha: Tuple[int, ...]
    beta: Tuple[int, ...]

    def __post_init__(self):
        alpha, beta = tuple(int(a) for a in self.alpha), tuple(int(b) for b in self.beta)
        if len(alpha) != len(beta) or not alpha:
            raise ModelError(f"子式行列数不一致: |α|={len(alpha)}, |β|={len(beta)}")
        for name, idx in (("α", alpha), ("β", beta)):
            if any(b <= a for a, b in zip(idx, idx[1:])):
                raise ModelError(f"{name} 必须严格递增: {idx}")
        if alpha[0] < 1 or alpha[-1] > 6:
            raise ModelError(f"α 超出 1..6: {alpha}")
        if beta[0] < 1:
            raise ModelError(f"β 必须从 1 开始编号: {beta}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @property
    def k(self) -> int:
        return len(self.alpha)

    def rows(self) -> List[int]:
        return [a - 1 for a in self.alpha]

    def cols(self) -> List[int]:
        return [b - 1 for b in self.beta]


def all_minor_indices(n: int, k: int) -> Iterator[MinorIndex]:
    """全部 k 阶子式索引"""
    for alpha in combinations(range(1, 7), k):
        for beta in combinations(range(1, n + 1), k):
            yield MinorIndex(alpha, beta)


def det(M: np.ndarray) -> float:
    """k ≤ 3 用闭式，k ≥ 4 用部分主元 LU"""
    k = M.shape[0]
    if k == 1:
        return float(M[0, 0])
    if k == 2:
        return float(M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0])
    if k == 3:
        return float(M[0] @ np.cross(M[1], M[2]))
    with warnings.catch_warnings():
        # 精确奇异时 LU 主元为零，行列式即为 0
        warnings.simplefilter("ignore", LinAlgWarning)
        lu, piv = lu_factor(M, check_finite=False)
    sign = -1.0 if np.count_nonzero(piv != np.arange(k)) % 2 else 1.0
    return float(sign * np.prod(np.diag(lu)))


def minor(chain: Chain, q, idx: MinorIndex) -> float:
    """m_{αβ}(q) = det J_{αβ}(q)"""
    _check_cols(chain, idx.beta)
    J = jacobian_spatial(chain, q)
    return det(J[np.ix_(idx.rows(), idx.cols())])


def minor_unsorted(chain: Chain, q, rows: Sequence[int], cols: Sequence[int]) -> float:
    """行列按给定顺序取子矩阵（不要求递增），用于检验交换列变号"""
    J = jacobian_spatial(chain, q)
    return det(J[np.ix_([r - 1 for r in rows], [c - 1 for c in cols])])


def minor_derivative_terms(nu: int, k: int) -> List[Tuple[int, ...]]:
    """ν 阶导数求和用到的全部组合 a，|a| = ν"""
    return list(compositions(nu, k))


def _check_cols(chain: Chain, beta: Sequence[int]) -> None:
    if beta[-1] > chain.n:
        raise ModelError(f"β 超出关节数 {chain.n}: {tuple(beta)}")


def _minor_from_columns(cols_by_order: np.ndarray, idx: MinorIndex, nu: int) -> float:
    """
    cols_by_order[l, j-1] 为第 l 阶列螺旋（时间导数或微分）
    """
    rows, cols = idx.rows(), idx.cols()
    total = 0.0
    nu_fact = factorial(nu)
    for a in compositions(nu, idx.k):
        M = np.column_stack([cols_by_order[a_j, c][rows] for a_j, c in zip(a, cols)])
        total += nu_fact / MultiIndex(a).factorial * det(M)
    return total


def minor_time_derivative(chain: Chain, state: DerivativeStack, idx: MinorIndex, nu: int) -> float:
    """
    dᵛ/dtᵛ m_{αβ}，列的时间导数来自关节螺旋递推

    Args:
        state: 阶数 ≥ ν 的导数栈
    """
    _check_cols(chain, idx.beta)
    if nu == 0:
        return minor(chain, state.q, idx)
    dS = screw_time_derivatives(chain, state, nu)
    return _minor_from_columns(dS, idx, nu)


def minor_differential(chain: Chain, q, idx: MinorIndex, i: int, x) -> float:
    """dⁱm_{αβ,q}(x)，列取螺旋微分 dᵃS(x)"""
    _check_cols(chain, idx.beta)
    x = chain.check_q(x)
    if i == 0:
        return minor(chain, q, idx)
    dS = screw_differentials(joint_screws_spatial(chain, q), x, i)
    return _minor_from_columns(dS, idx, i)


def minor_derivatives(cols_by_order: np.ndarray, indices: Sequence[MinorIndex], nu: int) -> np.ndarray:
    """对给定列导数数组批量计算一组子式的 ν 阶导数（ν = 0 时为子式本身）"""
    return np.array([_minor_from_columns(cols_by_order, idx, nu) for idx in indices])


def rank_by_minors(chain: Chain, q, tol: float = 1e-10) -> int:
    """不为零的最大子式阶数"""
    J = jacobian_spatial(chain, q)
    scale = max(1.0, float(np.max(np.abs(J))))
    for k in range(min(6, chain.n), 0, -1):
        for idx in all_minor_indices(chain.n, k):
            if abs(det(J[np.ix_(idx.rows(), idx.cols())])) > tol * scale ** k:
                return k
    return 0
