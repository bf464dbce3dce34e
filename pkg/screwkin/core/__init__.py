"""
核心模块
螺旋代数、多重指标、运动链与链式导数递推
"""

from .screw import Pose, UnitScrew, JointType, screw_bracket, adjoint, exp_screw
from .chain import Chain, DerivativeStack, make_chain

__all__ = [
    "Pose",
    "UnitScrew",
    "JointType",
    "screw_bracket",
    "adjoint",
    "exp_screw",
    "Chain",
    "DerivativeStack",
    "make_chain",
]
