"""
运动链模型
指数积运动学映射、瞬时关节螺旋、空间雅可比与空间速度螺旋

连杆与关节按 1..n 编号，关节 i 连接连杆 i−1 与连杆 i，连杆 0 为机架
"""

import logging
from typing import List, Optional, Sequence, Tuple
from dataclasses import dataclass, field

import numpy as np

from .screw import Pose, UnitScrew, JointType, adjoint, exp_screw
from ..errors import ModelError, DerivativeOrderError, check_index

logger = logging.getLogger(__name__)


# ==================== 数据结构 ====================

@dataclass(frozen=True, eq=False)
class Chain:
    """
    串联运动链

    Args:
        joints: 参考构型下（全局坐标系 F₀ 中）的关节螺旋
        body_frames: 各连杆参考坐标系 A_i，缺省为单位阵
        name: 名称
    """
    joints: Tuple[UnitScrew, ...]
    body_frames: Optional[Tuple[Pose, ...]] = None
    name: str = "chain"
    _screws: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        joints = tuple(self.joints)
        if not joints:
            raise ModelError("运动链至少需要一个关节")
        object.__setattr__(self, "joints", joints)
        if self.body_frames is not None:
            frames = tuple(self.body_frames)
            if len(frames) != len(joints):
                raise ModelError(f"body_frames 数量 {len(frames)} 与关节数 {len(joints)} 不一致")
            object.__setattr__(self, "body_frames", frames)
        Y = np.array([j.to_screwvec() for j in joints])
        Y.setflags(write=False)
        object.__setattr__(self, "_screws", Y)

    @property
    def n(self) -> int:
        return len(self.joints)

    dof = n

    @property
    def screws(self) -> np.ndarray:
        """参考构型下的关节螺旋 Y_j，形状 (n, 6)"""
        return self._screws

    def body_frame(self, i: int) -> Pose:
        check_index(i, self.n)
        if self.body_frames is None:
            return Pose.identity()
        return self.body_frames[i - 1]

    @property
    def characteristic_length(self) -> float:
        """关节轴点到原点的最大距离，用作容差尺度"""
        lengths = [float(np.linalg.norm(j.p)) for j in self.joints
                   if j.kind is not JointType.PRISMATIC]
        return max(lengths, default=0.0)

    def subchain(self, i: int) -> "Chain":
        """前 i 个关节组成的子链"""
        check_index(i, self.n)
        frames = None if self.body_frames is None else self.body_frames[:i]
        return Chain(self.joints[:i], frames, f"{self.name}[:{i}]")

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.n:
            raise ModelError(f"关节变量长度 {q.shape[0]} 与关节数 {self.n} 不一致")
        return q


@dataclass(frozen=True, eq=False)
class DerivativeStack:
    """
    构型及其各阶时间导数

    q 为 n 维构型，derivs = [q̇, q̈, …, q^(k)]，order = k
    """
    q: np.ndarray
    derivs: Tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        derivs = tuple(np.array(d, dtype=float).reshape(-1) for d in self.derivs)
        for l, d in enumerate(derivs, 1):
            if d.shape != q.shape:
                raise ModelError(f"第 {l} 阶导数长度 {d.shape[0]} 与构型长度 {q.shape[0]} 不一致")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "derivs", derivs)

    @classmethod
    def from_arrays(cls, q, *derivs) -> "DerivativeStack":
        return cls(q, tuple(derivs))

    @classmethod
    def linear(cls, q, x, order: int) -> "DerivativeStack":
        """沿直线 q + t x 的导数栈：q̇ = x，高阶为零"""
        x = np.asarray(x, dtype=float)
        return cls(q, (x,) + tuple(np.zeros_like(x) for _ in range(order - 1)))

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @property
    def order(self) -> int:
        return len(self.derivs)

    def d(self, l: int) -> np.ndarray:
        """第 l 阶导数，l = 0 返回 q"""
        if l == 0:
            return self.q
        if l > self.order:
            raise DerivativeOrderError(f"导数栈只有 {self.order} 阶，请求第 {l} 阶")
        return self.derivs[l - 1]

    def as_array(self) -> np.ndarray:
        """形状 (order+1, n)，第 0 行为 q"""
        return np.vstack([self.q, *self.derivs]) if self.derivs else self.q[None, :]

    def require(self, k: int) -> "DerivativeStack":
        if self.order < k:
            raise DerivativeOrderError(f"需要至少 {k} 阶导数，导数栈只有 {self.order} 阶")
        return self

    def truncated(self, k: int) -> "DerivativeStack":
        return DerivativeStack(self.q, self.require(k).derivs[:k])

    def scaled(self, factor: float) -> "DerivativeStack":
        """时间重参数化 t → a t：第 l 阶导数乘 a^l"""
        return DerivativeStack(self.q, tuple(d * factor ** l for l, d in enumerate(self.derivs, 1)))


# ==================== 运动学映射 ====================

def forward_poses(chain: Chain, q) -> List[Pose]:
    """返回 [f_0 = I, f_1, …, f_n]"""
    q = chain.check_q(q)
    poses = [Pose.identity()]
    for joint, qj in zip(chain.joints, q):
        poses.append(poses[-1] @ exp_screw(joint, qj))
    return poses


def kinematic_map(chain: Chain, q, i: Optional[int] = None, body_frame: bool = False) -> Pose:
    """
    指数积运动学映射 f_i(q) = exp(Y₁q₁)···exp(Y_i q_i)

    Args:
        i: 连杆序号，缺省为末端 n
        body_frame: 为 True 时返回 C_i = f_i(q)·A_i
    """
    i = chain.n if i is None else check_index(i, chain.n)
    f = forward_poses(chain, q)[i]
    if body_frame:
        return f @ chain.body_frame(i)
    return f


def body_poses(chain: Chain, q) -> List[Pose]:
    """各连杆位姿 C_i = f_i A_i，i = 1..n"""
    fs = forward_poses(chain, q)
    return [fs[i] @ chain.body_frame(i) for i in range(1, chain.n + 1)]


def relative_pose(chain: Chain, q, i: int, j: int) -> Pose:
    """C_{i,j} = C_i⁻¹ C_j"""
    Cs = body_poses(chain, q)
    check_index(i, chain.n)
    check_index(j, chain.n)
    return Cs[i - 1].inverse() @ Cs[j - 1]


def closure_residual(chain: Chain, q) -> float:
    """闭环残差 max|f_n(q) − I|"""
    return float(np.max(np.abs(kinematic_map(chain, q).matrix - np.eye(4))))


def joint_screws_spatial(chain: Chain, q) -> np.ndarray:
    """
    瞬时关节螺旋 S_j(q) = Ad_{f_{j−1}(q)} Y_j

    Returns:
        形状 (n, 6)，第 j−1 行为 S_j
    """
    fs = forward_poses(chain, q)
    Y = chain.screws
    S = np.empty_like(Y)
    S[0] = Y[0]
    for j in range(1, chain.n):
        S[j] = adjoint(fs[j]) @ Y[j]
    return S


def jacobian_spatial(chain: Chain, q, i: Optional[int] = None) -> np.ndarray:
    """
    连杆 i 的空间雅可比，形状 6×n，第 i 列之后为零
    """
    i = chain.n if i is None else check_index(i, chain.n)
    S = joint_screws_spatial(chain, q)
    J = np.zeros((6, chain.n))
    J[:, :i] = S[:i].T
    return J


def spatial_twist(chain: Chain, state: DerivativeStack, i: Optional[int] = None) -> np.ndarray:
    """V_i^s = Σ_{j≤i} S_j q̇_j"""
    i = chain.n if i is None else check_index(i, chain.n)
    state.require(1)
    S = joint_screws_spatial(chain, state.q)
    return S[:i].T @ state.d(1)[:i]


def spatial_twists_recursive(chain: Chain, state: DerivativeStack) -> np.ndarray:
    """V_i^s = V_{i−1}^s + S_i q̇_i，V_0 = 0；返回形状 (n, 6)"""
    state.require(1)
    S = joint_screws_spatial(chain, state.q)
    qd = state.d(1)
    V = np.zeros((chain.n, 6))
    acc = np.zeros(6)
    for i in range(chain.n):
        acc = acc + S[i] * qd[i]
        V[i] = acc
    return V


def make_chain(screws: Sequence[UnitScrew], name: str = "chain",
               body_frames: Optional[Sequence[Pose]] = None) -> Chain:
    return Chain(tuple(screws), None if body_frames is None else tuple(body_frames), name)
