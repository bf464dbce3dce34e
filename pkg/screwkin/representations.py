"""
本体与混合表示
关节螺旋、雅可比、偏导数与时间导数，以及速度螺旋导数在三种表示间的转换

    V_i^s = Ad_{C_i} V_i^b，V_i^h = Ad_{R_i} V_i^b = Ad_{−r_i} V_i^s = (ω_i^s, ṙ_i)
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core.chain import Chain, DerivativeStack, body_poses
from .core.derivatives import chainwise_derivatives, twist_derivatives_recursive
from .core.multiindex import MultiIndex, binomial
from .core.screw import Pose, ad_matrix, adjoint, adjoint_translation, screw_bracket, translation_screw
from .errors import DerivativeOrderError, ModelError, check_index

logger = logging.getLogger(__name__)


class Representation(Enum):
    SPATIAL = "s"
    BODY = "b"
    HYBRID = "h"

    @classmethod
    def parse(cls, text: str) -> "Representation":
        aliases = {"s": cls.SPATIAL, "spatial": cls.SPATIAL, "b": cls.BODY, "body": cls.BODY,
                   "h": cls.HYBRID, "hybrid": cls.HYBRID}
        try:
            return aliases[text.lower()]
        except KeyError:
            raise ModelError(f"未知的表示: {text}，可用 s/b/h") from None


@dataclass(frozen=True)
class RepTag:
    """表示类别及所属连杆（空间表示不需要连杆）"""
    kind: Representation
    link: Optional[int] = None

    def check(self, n: int) -> "RepTag":
        if self.kind is not Representation.SPATIAL:
            if self.link is None:
                raise ModelError(f"{self.kind.name} 表示需要指定连杆")
            check_index(self.link, n)
        return self


# ==================== 本体表示 ====================

def joint_screws_body(chain: Chain, q, i: int, recursive: bool = False) -> np.ndarray:
    """
    B_{i,j} = Ad_{C_{i,j} A_j⁻¹} Y_j，j = 1..i

    recursive=True 时用 B_{i,j} = Ad_{C_{i,i−1}} B_{i−1,j}，B_{i,i} = Ad_{A_i⁻¹} Y_i

    Returns:
        形状 (i, 6)
    """
    check_index(i, chain.n)
    Cs = body_poses(chain, q)
    Y = chain.screws
    if not recursive:
        Ci_inv = Cs[i - 1].inverse()
        return np.array([adjoint(Ci_inv @ Cs[j] @ chain.body_frame(j + 1).inverse()) @ Y[j]
                         for j in range(i)])
    B = np.zeros((0, 6))
    for l in range(1, i + 1):
        X = adjoint(chain.body_frame(l).inverse()) @ Y[l - 1]
        if l > 1:
            B = B @ adjoint(Cs[l - 1].inverse() @ Cs[l - 2]).T
        B = np.vstack([B, X])
    return B


def jacobian_body(chain: Chain, q, i: Optional[int] = None) -> np.ndarray:
    i = chain.n if i is None else check_index(i, chain.n)
    J = np.zeros((6, chain.n))
    J[:, :i] = joint_screws_body(chain, q, i).T
    return J


def twist_body(chain: Chain, state: DerivativeStack, i: Optional[int] = None) -> np.ndarray:
    """V_i^b = J_i^b q̇"""
    state.require(1)
    return jacobian_body(chain, state.q, i) @ state.d(1)


def twist_body_recursive(chain: Chain, state: DerivativeStack, i: Optional[int] = None) -> np.ndarray:
    """V_i^b = Ad_{C_{i,i−1}} V_{i−1}^b + X_i q̇_i"""
    i = chain.n if i is None else check_index(i, chain.n)
    state.require(1)
    Cs = body_poses(chain, state.q)
    qd = state.d(1)
    V = np.zeros(6)
    for l in range(1, i + 1):
        if l > 1:
            V = adjoint(Cs[l - 1].inverse() @ Cs[l - 2]) @ V
        V = V + adjoint(chain.body_frame(l).inverse()) @ chain.screws[l - 1] * qd[l - 1]
    return V


def partial_screw_body(chain: Chain, q, i: int, j: int, a: MultiIndex) -> np.ndarray:
    """
    ∂ᵃB_{i,j} = (−1)^ν ad_{B_{i,βν}} ··· ad_{B_{i,β1}} B_{i,j}

    β 为 a 展开的升序序列，只有 j < β ≤ i 时非零
    """
    check_index(i, chain.n)
    check_index(j, i, "关节")
    if len(a) != chain.n:
        raise ModelError(f"多重指数长度 {len(a)} 与关节数 {chain.n} 不一致")
    seq = a.sequence
    if any(not j < b <= i for b in seq):
        return np.zeros(6)
    B = joint_screws_body(chain, q, i)
    X = B[j - 1]
    for b in seq:
        X = -screw_bracket(B[b - 1], X)
    return X


def twist_derivatives_body(chain: Chain, state: DerivativeStack, i: int, k: int):
    """
    本体表示的链式递推 Ḃ_{i,j} = [B_{i,j}, 𝖡_{i,j+1}]，𝖡_{i,j} = Σ_{l=j}^{i} B_{i,l} q̇_l，
    从 j = i 反向递推到 1，D^k V_i^b = D^k 𝖡_{i,1}

    Returns:
        (dV, dB): dV 形状 (k+1, 6) 为 D^0..D^k V_i^b；dB[l, j-1] = D^l B_{i,j}
    """
    check_index(i, chain.n)
    if k < 0:
        raise DerivativeOrderError(f"导数阶数不能为负: {k}")
    state.require(k + 1)
    stack = state.truncated(k + 1)
    B = joint_screws_body(chain, stack.q, i)
    qd = stack.as_array()[:, :i]
    dB, dV = chainwise_derivatives(B[::-1], qd[:, ::-1], sign=-1.0)
    return dV[:, -1], dB[:, ::-1]


def body_acceleration_closed_form(chain: Chain, state: DerivativeStack, i: int) -> np.ndarray:
    """V̇_i^b = Σ_j B_{i,j} q̈_j + Σ_{j<k≤i} [B_{i,j}, B_{i,k}] q̇_j q̇_k"""
    state.require(2)
    B = joint_screws_body(chain, state.q, i)
    q1, q2 = state.d(1)[:i], state.d(2)[:i]
    V = B.T @ q2
    for j in range(i):
        for k in range(j + 1, i):
            V = V + screw_bracket(B[j], B[k]) * q1[j] * q1[k]
    return V


def body_jerk_closed_form(chain: Chain, state: DerivativeStack, i: int) -> np.ndarray:
    """
    V̈_i^b = Σ_j B_j q⃛_j + Σ_{j<k} [B_j, B_k](2q̈_j q̇_k + q̇_j q̈_k)
            + Σ_{j<k, j<l} [[B_j, B_l], B_k] q̇_j q̇_k q̇_l
            + Σ_{j<k<l} [B_j, [B_k, B_l]] q̇_j q̇_k q̇_l
    """
    state.require(3)
    B = joint_screws_body(chain, state.q, i)
    q1, q2, q3 = state.d(1)[:i], state.d(2)[:i], state.d(3)[:i]
    V = B.T @ q3
    for j in range(i):
        for k in range(j + 1, i):
            V = V + screw_bracket(B[j], B[k]) * (2.0 * q2[j] * q1[k] + q1[j] * q2[k])
            for l in range(j + 1, i):
                V = V + screw_bracket(screw_bracket(B[j], B[l]), B[k]) * q1[j] * q1[k] * q1[l]
            for l in range(k + 1, i):
                V = V + screw_bracket(B[j], screw_bracket(B[k], B[l])) * q1[j] * q1[k] * q1[l]
    return V


# ==================== 混合表示 ====================

def joint_screws_hybrid(chain: Chain, q, i: int) -> np.ndarray:
    """H_{i,j} = Ad_{R_i} B_{i,j} = Ad_{−r_i} S_j，形状 (i, 6)"""
    check_index(i, chain.n)
    C = body_poses(chain, q)[i - 1]
    B = joint_screws_body(chain, q, i)
    return B @ adjoint(Pose(C.R, np.zeros(3))).T


def jacobian_hybrid(chain: Chain, q, i: Optional[int] = None) -> np.ndarray:
    i = chain.n if i is None else check_index(i, chain.n)
    J = np.zeros((6, chain.n))
    J[:, :i] = joint_screws_hybrid(chain, q, i).T
    return J


def twist_hybrid(chain: Chain, state: DerivativeStack, i: Optional[int] = None) -> np.ndarray:
    """V_i^h = J_i^h q̇ = (ω_i^s, ṙ_i)"""
    state.require(1)
    return jacobian_hybrid(chain, state.q, i) @ state.d(1)


def _body_origin_motion(chain: Chain, state: DerivativeStack, order: int):
    """各连杆原点 r_j 及其导数、角速度 ω_j 及其导数（到 order−1 阶）"""
    Cs = body_poses(chain, state.q)
    r = np.array([C.r for C in Cs])
    dV = twist_derivatives_recursive(chain, state, order - 1).twists
    w = dV[:, :, :3]
    v = dV[:, :, 3:]
    rd = [r, v[0] + np.cross(w[0], r)]
    if order >= 2:
        rd.append(v[1] + np.cross(w[1], r) + np.cross(w[0], rd[1]))
    return rd, w


def hybrid_derivatives(chain: Chain, state: DerivativeStack, i: int, k: int) -> np.ndarray:
    """
    V_i^h 及其一、二阶导数，由 H_{i,j} 的导数求和

        H_{i,j} = Ad_d H_{j,j}，d = r_j − r_i
        Ḣ_{i,j} = (ad_ḋ + Ad_d ad_{ω_j}) H_{j,j}
        Ḧ_{i,j} = (ad_d̈ + 2 ad_ḋ ad_{ω_j} + Ad_d (ad_{ω̇_j} + ad_{ω_j}²)) H_{j,j}

    ad_ḋ 表示纯平移螺旋 (0, ḋ) 的 ad，ad_ω 表示 (ω, 0) 的 ad

    Returns:
        形状 (k+1, 6)
    """
    check_index(i, chain.n)
    if not 0 <= k <= 2:
        raise DerivativeOrderError(f"混合表示的显式导数只到 2 阶，请求 {k} 阶")
    state.require(k + 1)
    S_h = [joint_screws_hybrid(chain, state.q, j)[j - 1] for j in range(1, i + 1)]
    rd, w = _body_origin_motion(chain, state, k + 1)
    q = [state.d(l)[:i] for l in range(1, k + 2)]
    out = np.zeros((k + 1, 6))
    for j in range(i):
        d = rd[0][j] - rd[0][i - 1]
        Ad_d = adjoint_translation(d)
        Hjj = S_h[j]
        H = Ad_d @ Hjj
        out[0] += H * q[0][j]
        if k >= 1:
            ad_w = ad_matrix(np.concatenate([w[0, j], np.zeros(3)]))
            ad_dd = ad_matrix(translation_screw(rd[1][j] - rd[1][i - 1]))
            H1 = (ad_dd + Ad_d @ ad_w) @ Hjj
            out[1] += H1 * q[0][j] + H * q[1][j]
        if k >= 2:
            ad_w1 = ad_matrix(np.concatenate([w[1, j], np.zeros(3)]))
            ad_ddd = ad_matrix(translation_screw(rd[2][j] - rd[2][i - 1]))
            H2 = (ad_ddd + 2.0 * ad_dd @ ad_w + Ad_d @ (ad_w1 + ad_w @ ad_w)) @ Hjj
            out[2] += H2 * q[0][j] + 2.0 * H1 * q[1][j] + H * q[2][j]
    return out


# ==================== 表示转换 ====================

def _stack(derivs) -> np.ndarray:
    V = np.atleast_2d(np.asarray(derivs, dtype=float))
    if V.shape[1] != 6:
        raise ModelError(f"速度螺旋导数必须是 6 维: 形状 {V.shape}")
    return V


def _spatial_to_body(Vs: np.ndarray, C: Pose) -> np.ndarray:
    """M = Ad_C⁻¹，Ṁ = −M ad_{V^s}；D^kV^b = Σ C(k, i) D^iM D^{k−i}V^s"""
    k = Vs.shape[0] - 1
    M = [adjoint(C.inverse())]
    for l in range(1, k + 1):
        acc = np.zeros((6, 6))
        for t in range(l):
            acc -= binomial(l - 1, t) * M[t] @ ad_matrix(Vs[l - 1 - t])
        M.append(acc)
    return np.array([sum(binomial(l, t) * M[t] @ Vs[l - t] for t in range(l + 1))
                     for l in range(k + 1)])


def _body_to_spatial(Vb: np.ndarray, C: Pose) -> np.ndarray:
    """N = Ad_C，Ṅ = N ad_{V^b}"""
    k = Vb.shape[0] - 1
    N = [adjoint(C)]
    for l in range(1, k + 1):
        acc = np.zeros((6, 6))
        for t in range(l):
            acc += binomial(l - 1, t) * N[t] @ ad_matrix(Vb[l - 1 - t])
        N.append(acc)
    return np.array([sum(binomial(l, t) * N[t] @ Vb[l - t] for t in range(l + 1))
                     for l in range(k + 1)])


def _spatial_to_hybrid(Vs: np.ndarray, r: np.ndarray) -> np.ndarray:
    """
    D^kV^h = Ad_{−r} D^kV^s − Σ_{i=1}^{k} C(k, i) ad_{(0, r^(i))} D^{k−i}V^s，
    r^(i+1) 取 D^iV^h 的线部
    """
    k = Vs.shape[0] - 1
    Ad = adjoint_translation(-r)
    out = np.zeros_like(Vs)
    rd = [r]
    for l in range(k + 1):
        v = Ad @ Vs[l]
        for t in range(1, l + 1):
            v -= binomial(l, t) * screw_bracket(translation_screw(rd[t]), Vs[l - t])
        out[l] = v
        rd.append(v[3:])
    return out


def _hybrid_to_spatial(Vh: np.ndarray, r: np.ndarray) -> np.ndarray:
    """D^kV^s = Ad_r D^kV^h + Σ_{i=1}^{k} C(k, i) ad_{(0, r^(i))} D^{k−i}V^h"""
    k = Vh.shape[0] - 1
    Ad = adjoint_translation(r)
    rd = [r] + [Vh[l, 3:] for l in range(k)]
    out = np.zeros_like(Vh)
    for l in range(k + 1):
        v = Ad @ Vh[l]
        for t in range(1, l + 1):
            v += binomial(l, t) * screw_bracket(translation_screw(rd[t]), Vh[l - t])
        out[l] = v
    return out


def convert_derivatives(derivs, source, target, pose: Optional[Pose] = None) -> np.ndarray:
    """
    速度螺旋导数栈 [V, V̇, …, D^kV] 在三种表示之间转换（六个方向）

    Args:
        source, target: Representation 或 "s"/"b"/"h"
        pose: 连杆位姿 C_i；本体表示需要完整位姿，混合表示只用其平移 r_i

    Raises:
        ModelError: 缺少位姿数据
    """
    source = source if isinstance(source, Representation) else Representation.parse(source)
    target = target if isinstance(target, Representation) else Representation.parse(target)
    V = _stack(derivs)
    if source is target:
        return V.copy()
    if pose is None:
        raise ModelError(f"{source.name} → {target.name} 转换需要连杆位姿")
    if source is Representation.BODY:
        Vs = _body_to_spatial(V, pose)
    elif source is Representation.HYBRID:
        Vs = _hybrid_to_spatial(V, pose.r)
    else:
        Vs = V
    if target is Representation.SPATIAL:
        return Vs
    if target is Representation.BODY:
        return _spatial_to_body(Vs, pose)
    return _spatial_to_hybrid(Vs, pose.r)


# D^kV^h 修正项 ad_{(0, r^(t))} D^{k−t}V 的系数，t = 1..k
_HYBRID_COEFFS = {0: (), 1: (1,), 2: (2, 1), 3: (3, 3, 1), 4: (4, 6, 4, 1)}


def convert_explicit(derivs, source, target, pose: Pose) -> np.ndarray:
    """
    展开的 k ≤ 4 转换公式（空间↔本体、空间↔混合），与通用二项式形式互相校验

    空间 → 本体，ad = ad_{V^s}:
        V̈^b = Ad_C⁻¹(V̈ − ad V̇)
        V⃛^b = Ad_C⁻¹(V⃛ − 2ad V̈ + ad² V̇)
        V⃜^b = Ad_C⁻¹(V⃜ − 3ad V⃛ + (3ad² − 2ad_V̇) V̈ + (ad_V̇ ad − ad³) V̇)
    本体 → 空间，ad = ad_{V^b}，符号相反:
        V̈^s = Ad_C(V̈ + ad V̇)
        V⃛^s = Ad_C(V⃛ + 2ad V̈ + ad² V̇)
        V⃜^s = Ad_C(V⃜ + 3ad V⃛ + (3ad² + 2ad_V̇) V̈ + (ad_V̇ ad + ad³) V̇)
    """
    source = source if isinstance(source, Representation) else Representation.parse(source)
    target = target if isinstance(target, Representation) else Representation.parse(target)
    V = _stack(derivs)
    k = V.shape[0] - 1
    if k > 4:
        raise DerivativeOrderError(f"展开公式只到 4 阶，请求 {k} 阶")
    pair = (source, target)
    if pair in ((Representation.SPATIAL, Representation.BODY), (Representation.BODY, Representation.SPATIAL)):
        sign = -1.0 if source is Representation.SPATIAL else 1.0
        Ad = adjoint(pose.inverse()) if sign < 0 else adjoint(pose)
        ad = ad_matrix(V[0])
        out = [V[0], V[1] if k >= 1 else None]
        if k >= 2:
            out.append(V[2] + sign * ad @ V[1])
        if k >= 3:
            out.append(V[3] + sign * 2.0 * ad @ V[2] + ad @ ad @ V[1])
        if k >= 4:
            ad1 = ad_matrix(V[1])
            out.append(V[4] + sign * 3.0 * ad @ V[3] + (3.0 * ad @ ad + sign * 2.0 * ad1) @ V[2]
                       + (ad1 @ ad + sign * ad @ ad @ ad) @ V[1])
        return np.array([Ad @ v for v in out[:k + 1]])
    if pair in ((Representation.SPATIAL, Representation.HYBRID), (Representation.HYBRID, Representation.SPATIAL)):
        to_h = source is Representation.SPATIAL
        r = pose.r
        Ad = adjoint_translation(-r if to_h else r)
        # 到混合表示时 r 的导数来自输出，反之来自输入
        rd = [r]
        out = []
        for l in range(k + 1):
            corr = np.zeros(6)
            for t, c in enumerate(_HYBRID_COEFFS[l], 1):
                corr += c * screw_bracket(translation_screw(rd[t]), V[l - t])
            v = Ad @ V[l] - corr if to_h else Ad @ V[l] + corr
            out.append(v)
            rd.append((v if to_h else V[l])[3:])
        return np.array(out)
    raise ModelError(f"展开公式不含 {source.name} → {target.name}，请用 convert_derivatives")
