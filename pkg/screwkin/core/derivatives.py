"""
瞬时关节螺旋的偏导数与空间速度螺旋的任意阶时间导数

递推核: 对每个关节 i
    D^l S_i = Σ_{m<l} C(l−1, m) [D^m 𝖲_{i−1}, D^{l−1−m} S_i]
    D^l 𝖲_i = D^l 𝖲_{i−1} + Σ_{m≤l} C(l, m) D^m S_i q_i^(l−m+1)
其中 𝖲_i = Σ_{j≤i} S_j q̇_j = V_i^s
"""

import logging
from typing import Optional, Sequence
from dataclasses import dataclass

import numpy as np

from .chain import Chain, DerivativeStack, joint_screws_spatial
from .multiindex import MultiIndex, binomial
from .screw import screw_bracket
from ..errors import DerivativeOrderError, ModelError, check_index

logger = logging.getLogger(__name__)


# ==================== 数据结构 ====================

@dataclass(frozen=True, eq=False)
class TwistDerivs:
    """
    速度螺旋及关节螺旋的时间导数

    screws[l, j-1] = D^l S_j，至少到 order 阶（一般递推多给一阶）
    twists[l, i-1] = D^l V_i^s，l = 0..order
    """
    screws: np.ndarray
    twists: np.ndarray

    @property
    def order(self) -> int:
        return self.twists.shape[0] - 1

    def twist(self, i: int, l: int = 0) -> np.ndarray:
        return self.twists[l, i - 1]

    def screw(self, j: int, l: int = 0) -> np.ndarray:
        return self.screws[l, j - 1]


# ==================== 递推核 ====================

def chainwise_derivatives(screws: np.ndarray, qd: np.ndarray, sign: float = 1.0):
    """
    链式递推核，供空间与本体表示共用

    Args:
        screws: 形状 (n, 6)，按递推顺序排列的螺旋
        qd: 形状 (m+1, n)，qd[l] 为第 l 阶关节导数（qd[0] 不使用）
        sign: 括号方向，空间表示为 +1（Ṡ = [𝖲, S]），本体表示为 −1（Ḃ = [B, 𝖡]）

    Returns:
        (dS, dV): dS 形状 (m+1, n, 6) 为 D^l 螺旋，dV 形状 (m, n, 6) 为 D^l 累积和
    """
    m = qd.shape[0] - 1
    n = screws.shape[0]
    if m < 1:
        raise DerivativeOrderError("递推至少需要一阶关节导数")
    dS = np.zeros((m + 1, n, 6))
    dV = np.zeros((m, n, 6))
    prev = np.zeros((m, 6))
    for i in range(n):
        dS[0, i] = screws[i]
        for l in range(1, m + 1):
            acc = np.zeros(6)
            for t in range(l):
                acc += binomial(l - 1, t) * screw_bracket(prev[t], dS[l - 1 - t, i])
            dS[l, i] = sign * acc
        cur = prev.copy()
        for l in range(m):
            for t in range(l + 1):
                cur[l] += binomial(l, t) * dS[t, i] * qd[l - t + 1, i]
        dV[:, i] = cur
        prev = cur
    return dS, dV


# ==================== 时间导数 ====================

def twist_derivatives_recursive(chain: Chain, state: DerivativeStack,
                                k: Optional[int] = None) -> TwistDerivs:
    """
    一般递推：导数栈阶数为 k+1 时给出 D^l V_i^s (l ≤ k) 与 D^l S_i (l ≤ k+1)

    Args:
        k: 输出的最高速度螺旋导数阶，缺省为 state.order − 1
    """
    if state.order < 1:
        raise DerivativeOrderError("导数栈至少需要 q̇")
    k = state.order - 1 if k is None else k
    if k < 0 or state.order < k + 1:
        raise DerivativeOrderError(f"D^{k}V 需要 {k + 1} 阶导数栈，实际为 {state.order} 阶")
    stack = state.truncated(k + 1)
    S = joint_screws_spatial(chain, stack.q)
    dS, dV = chainwise_derivatives(S, stack.as_array())
    return TwistDerivs(screws=dS, twists=dV)


def screw_time_derivatives(chain: Chain, state: DerivativeStack, order: int) -> np.ndarray:
    """D^l S_j，l = 0..order；只需要 order 阶导数栈"""
    if order == 0:
        return joint_screws_spatial(chain, state.q)[None]
    stack = state.truncated(order)
    dS, _ = chainwise_derivatives(joint_screws_spatial(chain, stack.q), stack.as_array())
    return dS


def twist_derivatives_closed(chain: Chain, state: DerivativeStack,
                             order: Optional[int] = None) -> TwistDerivs:
    """
    一至三阶的显式 O(n) 递推

        V̇_i = V̇_{i−1} + (q̈_i + q̇_i ad_V) S_i
        V̈_i = V̈_{i−1} + (q⃛_i + 2q̈_i ad_V + q̇_i (ad_V̇ + ad_V²)) S_i
        V⃛_i = V⃛_{i−1} + (q⃜_i + 3q⃛_i ad_V + 3q̈_i (ad_V̇ + ad_V²)
                + q̇_i (ad_V̈ + 2 ad_V̇ ad_V + ad_V ad_V̇ + ad_V³)) S_i

    Raises:
        DerivativeOrderError: 请求阶数大于 3
    """
    order = state.order - 1 if order is None else order
    if order > 3:
        raise DerivativeOrderError(f"显式递推只支持到 3 阶，请求 {order} 阶，请使用一般递推")
    state.require(order + 1)
    q = [state.d(l) for l in range(order + 2)]
    S = joint_screws_spatial(chain, state.q)
    n = chain.n
    twists = np.zeros((order + 1, n, 6))
    screws = np.zeros((order + 1, n, 6))
    V = np.zeros((4, 6))
    for i in range(n):
        s = S[i]
        V[0] = V[0] + s * q[1][i]
        screws[0, i] = s
        if order >= 1:
            s1 = screw_bracket(V[0], s)
            screws[1, i] = s1
            V[1] = V[1] + s * q[2][i] + q[1][i] * s1
        if order >= 2:
            vv = screw_bracket(V[0], s1)
            s2 = screw_bracket(V[1], s) + vv
            screws[2, i] = s2
            V[2] = V[2] + s * q[3][i] + 2.0 * q[2][i] * s1 + q[1][i] * s2
        if order >= 3:
            s3 = (screw_bracket(V[2], s) + 2.0 * screw_bracket(V[1], s1)
                  + screw_bracket(V[0], screw_bracket(V[1], s)) + screw_bracket(V[0], vv))
            screws[3, i] = s3
            V[3] = V[3] + s * q[4][i] + 3.0 * q[3][i] * s1 + 3.0 * q[2][i] * s2 + q[1][i] * s3
        twists[:, i] = V[:order + 1]
    return TwistDerivs(screws=screws, twists=twists)


def acceleration_closed_form(chain: Chain, state: DerivativeStack, i: Optional[int] = None) -> np.ndarray:
    """V̇_i = Σ S_j q̈_j + Σ_{k<j} [S_k, S_j] q̇_k q̇_j"""
    i = chain.n if i is None else check_index(i, chain.n)
    state.require(2)
    S = joint_screws_spatial(chain, state.q)
    qd, qdd = state.d(1), state.d(2)
    V = S[:i].T @ qdd[:i]
    for j in range(i):
        for k in range(j):
            V = V + screw_bracket(S[k], S[j]) * qd[k] * qd[j]
    return V


def jerk_closed_form(chain: Chain, state: DerivativeStack, i: Optional[int] = None) -> np.ndarray:
    """
    显式嵌套求和的 jerk 公式，仅作递推的对照

    V̈_i = Σ S_j q⃛_j + Σ_{k<j} [S_k, S_j](2q̇_k q̈_j + q̈_k q̇_j)
          + Σ_{l<k<j} [[S_l, S_k], S_j] q̇_l q̇_k q̇_j
          + Σ_{k<j, l<j} [S_k, [S_l, S_j]] q̇_l q̇_k q̇_j
    """
    i = chain.n if i is None else check_index(i, chain.n)
    state.require(3)
    S = joint_screws_spatial(chain, state.q)
    q1, q2, q3 = state.d(1), state.d(2), state.d(3)
    V = S[:i].T @ q3[:i]
    for j in range(i):
        for k in range(j):
            b = screw_bracket(S[k], S[j])
            V = V + b * (2.0 * q1[k] * q2[j] + q2[k] * q1[j])
            for l in range(k):
                V = V + screw_bracket(screw_bracket(S[l], S[k]), S[j]) * q1[l] * q1[k] * q1[j]
            for l in range(j):
                V = V + screw_bracket(S[k], screw_bracket(S[l], S[j])) * q1[l] * q1[k] * q1[j]
    return V


def jerk_closed_form_final(chain: Chain, state: DerivativeStack, i: Optional[int] = None) -> np.ndarray:
    """
    jerk 的化简形式

    V̈_i = Σ S_j q⃛_j + 2 Σ_{l<k<j} [S_l, [S_k, S_j]] q̇_l q̇_k q̇_j
          + Σ_{k<j} ([S_k, S_j](q̈_k q̇_j + 2 q̇_k q̈_j) + [S_k, [S_k, S_j]] q̇_k² q̇_j)
    """
    i = chain.n if i is None else check_index(i, chain.n)
    state.require(3)
    S = joint_screws_spatial(chain, state.q)
    q1, q2, q3 = state.d(1), state.d(2), state.d(3)
    V = S[:i].T @ q3[:i]
    for j in range(i):
        for k in range(j):
            b = screw_bracket(S[k], S[j])
            V = V + b * (q2[k] * q1[j] + 2.0 * q1[k] * q2[j])
            V = V + screw_bracket(S[k], b) * q1[k] ** 2 * q1[j]
            for l in range(k):
                V = V + 2.0 * screw_bracket(S[l], b) * q1[l] * q1[k] * q1[j]
    return V


# ==================== 偏导数 ====================

def _nested_ad(S: np.ndarray, seq: Sequence[int], target: np.ndarray) -> np.ndarray:
    """ad_{S_β1} ··· ad_{S_βν} X，β1 在最外层"""
    X = target
    for j in reversed(seq):
        X = screw_bracket(S[j - 1], X)
    return X


def partial_screw(chain: Chain, q, i: int, a: MultiIndex) -> np.ndarray:
    """
    ∂^a S_i = Π_j ad^{a_j}_{S_j} S_i，下标小者在外

    对 q_j (j ≥ i) 的导数为零
    """
    check_index(i, chain.n)
    if len(a) != chain.n:
        raise ModelError(f"多重指数长度 {len(a)} 与关节数 {chain.n} 不一致")
    if any(a.a[j] for j in range(i - 1, chain.n)):
        return np.zeros(6)
    S = joint_screws_spatial(chain, q)
    return _nested_ad(S, a.sequence, S[i - 1])


def partial_screw_sequence(chain: Chain, q, i: int, seq: Sequence[int]) -> np.ndarray:
    """按任意顺序给出的求导变量序列求偏导，结果与顺序无关"""
    return partial_screw(chain, q, i, MultiIndex.from_sequence(chain.n, seq))
