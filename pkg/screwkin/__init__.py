"""
screwkin - 基于螺旋理论的高阶运动学引擎
Higher-order screw kinematics for serial chains and closed linkages
"""

__version__ = "1.0.0"
__author__ = "screwkin Team"

from .config import Config, Tolerances, ConfigManager, get_config, set_config
from .errors import (
    ScrewkinError,
    ModelError,
    NumericError,
    SingularityError,
    ClosureViolationError,
)
from .core.screw import Pose, UnitScrew, JointType
from .core.chain import Chain, DerivativeStack, make_chain
from .mobility import LoopSpec, LoopSystem
from .models import Model, load_model


def get_cli():
    """命令行入口（延迟导入）"""
    from .__main__ import main
    return main


__all__ = [
    "Config",
    "Tolerances",
    "ConfigManager",
    "get_config",
    "set_config",
    "ScrewkinError",
    "ModelError",
    "NumericError",
    "SingularityError",
    "ClosureViolationError",
    "Pose",
    "UnitScrew",
    "JointType",
    "Chain",
    "DerivativeStack",
    "make_chain",
    "LoopSpec",
    "LoopSystem",
    "Model",
    "load_model",
    "get_cli",
]
