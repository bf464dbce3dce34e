"""
螺旋代数
SE(3) 位姿、se(3) 螺旋坐标、指数映射、伴随变换与螺旋积

螺旋坐标按射线坐标排列 X = (ξ, η)，前三项为角部，后三项为线部，
以形状 (6,) 的 numpy 数组表示
"""

import logging
from enum import Enum
from typing import Optional, Tuple
from dataclasses import dataclass, field

import numpy as np

from ..config import get_config
from ..errors import ModelError

logger = logging.getLogger(__name__)

ScrewVec = np.ndarray


# ==================== 基本运算 ====================

def skew(v: np.ndarray) -> np.ndarray:
    """3 维向量的反对称矩阵 ṽ"""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def unskew(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def hat(X: ScrewVec) -> np.ndarray:
    """螺旋坐标 → 4×4 se(3) 矩阵"""
    X = np.asarray(X, dtype=float)
    M = np.zeros((4, 4))
    M[:3, :3] = skew(X[:3])
    M[:3, 3] = X[3:]
    return M


def vee(M: np.ndarray, tol: Optional[float] = None) -> ScrewVec:
    """
    4×4 se(3) 矩阵 → 螺旋坐标，tol 缺省取 tol_orth

    Raises:
        ModelError: 形状不对、底行非零或左上块不反对称
    """
    tol = get_config().tolerances.tol_orth if tol is None else tol
    M = np.asarray(M, dtype=float)
    if M.shape != (4, 4):
        raise ModelError(f"vee 需要 4×4 矩阵，收到形状 {M.shape}")
    if np.max(np.abs(M[3])) > tol:
        raise ModelError(f"不是 se(3) 矩阵: 底行非零 {M[3]}")
    W = M[:3, :3]
    if np.max(np.abs(W + W.T)) > tol:
        raise ModelError("不是 se(3) 矩阵: 左上 3×3 块不反对称")
    return np.concatenate([unskew(W), M[:3, 3]])


def screw_bracket(X1: ScrewVec, X2: ScrewVec) -> ScrewVec:
    """螺旋积 [X1, X2] = (ξ1×ξ2, η1×ξ2 + ξ1×η2)"""
    xi1, eta1 = X1[:3], X1[3:]
    xi2, eta2 = X2[:3], X2[3:]
    return np.concatenate([np.cross(xi1, xi2), np.cross(eta1, xi2) + np.cross(xi1, eta2)])


def ad_matrix(X: ScrewVec) -> np.ndarray:
    """ad_X = [[ξ̃, 0], [η̃, ξ̃]]，满足 ad_X Y = [X, Y]"""
    xi_t = skew(X[:3])
    ad = np.zeros((6, 6))
    ad[:3, :3] = xi_t
    ad[3:, :3] = skew(X[3:])
    ad[3:, 3:] = xi_t
    return ad


def translation_screw(v: np.ndarray) -> ScrewVec:
    """纯线部螺旋 (0, v)，ad_{(0,v)} 只作用在角部上"""
    return np.concatenate([np.zeros(3), np.asarray(v, dtype=float)])


# ==================== SO(3) 指数 ====================

def _rodrigues_coeffs(phi: float, small: Optional[float] = None) -> Tuple[float, float]:
    """返回 sinc(φ) 与 (1−cos φ)/φ²，φ < small_angle 时用 4 项级数"""
    if small is None:
        small = get_config().tolerances.small_angle
    if phi < small:
        p2 = phi * phi
        a = 1.0 - p2 / 6.0 + p2 * p2 / 120.0 - p2 ** 3 / 5040.0
        b = 0.5 - p2 / 24.0 + p2 * p2 / 720.0 - p2 ** 3 / 40320.0
        return a, b
    return np.sin(phi) / phi, (1.0 - np.cos(phi)) / (phi * phi)


def exp_so3(x: np.ndarray) -> np.ndarray:
    """
    Euler-Rodrigues 公式

    R = I + sinc‖x‖·x̃ + ½ sinc²(‖x‖/2)·x̃²
    """
    x = np.asarray(x, dtype=float)
    a, b = _rodrigues_coeffs(float(np.linalg.norm(x)))
    xt = skew(x)
    return np.eye(3) + a * xt + b * (xt @ xt)


def exp_so3_forms(x: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Rodrigues 公式的三种写法，仅用于交叉校验（x ≠ 0）

    Returns:
        (按 ‖x‖ 展开, sinc 形式, 单位轴+角度形式)
    """
    x = np.asarray(x, dtype=float)
    phi = float(np.linalg.norm(x))
    if phi == 0.0:
        raise ModelError("exp_so3_forms 需要非零向量")
    xt = skew(x)
    I = np.eye(3)
    f1 = I + np.sin(phi) / phi * xt + (1.0 - np.cos(phi)) / phi ** 2 * (xt @ xt)
    half = np.sin(phi / 2.0) / (phi / 2.0)
    f2 = I + np.sinc(phi / np.pi) * xt + 0.5 * half * half * (xt @ xt)
    nt = skew(x / phi)
    f3 = I + np.sin(phi) * nt + (1.0 - np.cos(phi)) * (nt @ nt)
    return f1, f2, f3


# ==================== 位姿 ====================

@dataclass(frozen=True, eq=False)
class Pose:
    """刚体位姿 (R, r)，不可变"""
    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    r: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        r = np.array(self.r, dtype=float).reshape(3)
        R.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "r", r)

    @classmethod
    def identity(cls) -> "Pose":
        return cls()

    @classmethod
    def translation(cls, r) -> "Pose":
        return cls(np.eye(3), r)

    @classmethod
    def from_matrix(cls, M) -> "Pose":
        M = np.asarray(M, dtype=float)
        if M.shape != (4, 4):
            raise ModelError(f"位姿矩阵必须是 4×4，收到 {M.shape}")
        return cls(M[:3, :3], M[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.R
        M[:3, 3] = self.r
        return M

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.R @ other.R, self.R @ other.r + self.r)

    __matmul__ = compose

    def inverse(self) -> "Pose":
        Rt = self.R.T
        return Pose(Rt, -Rt @ self.r)

    def apply(self, p) -> np.ndarray:
        return self.R @ np.asarray(p, dtype=float) + self.r

    def is_valid(self, tol: Optional[float] = None) -> bool:
        """RᵀR = I 且 det R = +1，从不静默正交化"""
        tol = get_config().tolerances.tol_orth if tol is None else tol
        ortho = np.max(np.abs(self.R.T @ self.R - np.eye(3)))
        return bool(ortho < tol and abs(np.linalg.det(self.R) - 1.0) < tol)

    def validate(self, tol: Optional[float] = None) -> "Pose":
        tol = get_config().tolerances.tol_orth if tol is None else tol
        if not self.is_valid(tol):
            raise ModelError(f"旋转矩阵不正交 (容差 {tol})")
        return self

    def allclose(self, other: "Pose", atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.R, other.R, atol=atol) and np.allclose(self.r, other.r, atol=atol))


def rel_pose(C1: Pose, C2: Pose) -> Pose:
    """相对位姿 C_{12} = C1⁻¹ C2"""
    return C1.inverse() @ C2


# ==================== 关节螺旋 ====================

class JointType(Enum):
    """螺距类别"""
    REVOLUTE = "revolute"
    HELICAL = "helical"
    PRISMATIC = "prismatic"


@dataclass(frozen=True, eq=False)
class UnitScrew:
    """
    单位螺旋（关节轴）

    Args:
        e: 单位轴向
        p: 轴上一点
        kind: 螺距类别，移动副不做 h=∞ 运算
        h: 螺旋副螺距（长度/弧度）
    """
    e: np.ndarray
    p: np.ndarray = field(default_factory=lambda: np.zeros(3))
    kind: JointType = JointType.REVOLUTE
    h: float = 0.0

    def __post_init__(self):
        e = np.array(self.e, dtype=float).reshape(3)
        p = np.array(self.p, dtype=float).reshape(3)
        if abs(np.linalg.norm(e) - 1.0) > 1e-12:
            raise ModelError(f"关节轴不是单位向量: ‖e‖ = {np.linalg.norm(e)}")
        if self.kind is not JointType.HELICAL and self.h != 0.0:
            raise ModelError(f"只有螺旋副可以设置螺距，{self.kind.value} 收到 h={self.h}")
        e.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "h", float(self.h))

    @classmethod
    def revolute(cls, e, p=(0.0, 0.0, 0.0)) -> "UnitScrew":
        return cls(e, p, JointType.REVOLUTE)

    @classmethod
    def prismatic(cls, e, p=(0.0, 0.0, 0.0)) -> "UnitScrew":
        return cls(e, p, JointType.PRISMATIC)

    @classmethod
    def helical(cls, e, p, h: float) -> "UnitScrew":
        return cls(e, p, JointType.HELICAL, h)

    def to_screwvec(self) -> ScrewVec:
        """转动/螺旋副: (e, p×e + h e)；移动副: (0, e)"""
        if self.kind is JointType.PRISMATIC:
            return np.concatenate([np.zeros(3), self.e])
        return np.concatenate([self.e, np.cross(self.p, self.e) + self.h * self.e])


def exp_screw(s: UnitScrew, phi: float) -> Pose:
    """关节螺旋的指数映射 exp(Y φ)"""
    if s.kind is JointType.PRISMATIC:
        return Pose(np.eye(3), phi * s.e)
    R = exp_so3(phi * s.e)
    r = (np.eye(3) - R) @ s.p + phi * s.h * s.e
    return Pose(R, r)


def exp_twist(X: ScrewVec, phi: float = 1.0) -> Pose:
    """一般螺旋坐标的指数映射 exp(X̂ φ)，按轴、螺距分解后调用闭式解"""
    X = np.asarray(X, dtype=float)
    xi, eta = X[:3], X[3:]
    w = float(np.linalg.norm(xi))
    if w < 1e-14:
        return Pose(np.eye(3), phi * eta)
    e = xi / w
    p = np.cross(xi, eta) / (w * w)
    h = float(xi @ eta) / (w * w)
    R = exp_so3(phi * xi)
    r = (np.eye(3) - R) @ p + phi * w * h * e
    return Pose(R, r)


# ==================== 伴随变换 ====================

def adjoint(C: Pose) -> np.ndarray:
    """Ad_C = [[R, 0], [r̃R, R]]"""
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = C.R
    Ad[3:, 3:] = C.R
    Ad[3:, :3] = skew(C.r) @ C.R
    return Ad


def adjoint_inv(C: Pose) -> np.ndarray:
    """Ad_C⁻¹ = Ad_{C⁻¹}"""
    return adjoint(C.inverse())


def adjoint_translation(r) -> np.ndarray:
    """纯平移 Ad_r = [[I, 0], [r̃, I]]"""
    Ad = np.eye(6)
    Ad[3:, :3] = skew(np.asarray(r, dtype=float))
    return Ad


def adjoint_rotation(R) -> np.ndarray:
    """纯转动 Ad_R = diag(R, R)"""
    Ad = np.zeros((6, 6))
    Ad[:3, :3] = R
    Ad[3:, 3:] = R
    return Ad


def adjoint_rate(C: Pose, V_s: ScrewVec) -> np.ndarray:
    """d/dt Ad_C = ad_{V^s} Ad_C，V^s 为 C 的空间速度螺旋"""
    return ad_matrix(V_s) @ adjoint(C)


def adjoint_inv_rate(C: Pose, V_s: ScrewVec) -> np.ndarray:
    """d/dt Ad_C⁻¹ = −Ad_C⁻¹ ad_{V^s}"""
    return -adjoint_inv(C) @ ad_matrix(V_s)
