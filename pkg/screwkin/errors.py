"""
异常定义
库内所有错误都从 ScrewkinError 派生，命令行据此映射退出码
"""

from typing import Optional


class ScrewkinError(Exception):
    """库错误基类"""

    exit_code = 1


class ModelError(ScrewkinError, ValueError):
    """模型/输入数据不合法（退出码 2）"""

    exit_code = 2


class IndexRangeError(ModelError, IndexError):
    """连杆或关节序号越界"""


class DerivativeOrderError(ModelError):
    """导数阶数不足或超过上限"""


class NumericError(ScrewkinError, ArithmeticError):
    """数值计算失败（退出码 3）"""

    exit_code = 3


class SingularityError(NumericError):
    """雅可比矩阵奇异或病态"""

    def __init__(self, message: str, sigma_min: Optional[float] = None,
                 condition: Optional[float] = None):
        super().__init__(message)
        self.sigma_min = sigma_min
        self.condition = condition


class ClosureViolationError(NumericError):
    """构型不满足闭环约束"""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class ZeroScrewError(NumericError):
    """关节螺旋范数为零"""


def check_index(i: int, n: int, what: str = "连杆") -> int:
    """检查 1..n 范围内的序号，返回原值"""
    if not 1 <= int(i) <= n:
        raise IndexRangeError(f"{what}序号越界: {i}，有效范围 1..{n}")
    return int(i)
