"""
统一配置管理模块
容差表、最大导数阶数，支持配置文件与环境变量 SCREWKIN_TOL 覆盖
"""

import os
import json
import logging
from typing import Optional, Dict, Any
from dataclasses import dataclass, field, asdict, fields, replace

from .errors import ModelError

logger = logging.getLogger(__name__)

# 默认配置文件路径
DEFAULT_CONFIG_PATH = os.path.expanduser("~/.screwkin/config.json")

ENV_TOL = "SCREWKIN_TOL"


@dataclass(frozen=True)
class Tolerances:
    """数值容差"""
    tol_orth: float = 1e-9        # 旋转矩阵正交性
    tol_loop: float = 1e-8        # 闭环残差 ‖f_n(q) − I‖
    tol_cone_rel: float = 1e-9    # 切锥可行性，乘以特征长度
    rank_rel: float = 1e-10       # 相对 σ_max 的秩阈值
    cond_max: float = 1e8         # 条件数门限
    gap_warn: float = 1e3         # 奇异值间隙告警
    zero_coeff: float = 1e-12     # 多项式零系数
    small_angle: float = 1e-4     # Rodrigues 级数切换

    def cone(self, scale: float = 1.0) -> float:
        """按特征长度缩放的切锥容差"""
        return self.tol_cone_rel * max(1.0, float(scale))


@dataclass(frozen=True)
class Config:
    """全局配置"""
    tolerances: Tolerances = field(default_factory=Tolerances)
    k_max: int = 8
    # 局部秩亏时 J_d 用伪逆
    pseudoinverse: bool = True
    float_digits: int = 17

    def with_tolerances(self, **overrides: float) -> "Config":
        return replace(self, tolerances=replace(self.tolerances, **overrides))


def parse_tol_overrides(text: str) -> Dict[str, float]:
    """
    解析 SCREWKIN_TOL

    Args:
        text: 形如 "tol_loop=1e-10,cond_max=1e6"

    Returns:
        字段名到数值的字典
    """
    known = {f.name for f in fields(Tolerances)}
    result: Dict[str, float] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise ModelError(f"{ENV_TOL} 格式错误: {item!r}，应为 name=value")
        name, value = (s.strip() for s in item.split("=", 1))
        if name not in known:
            raise ModelError(f"未知的容差名称: {name}，可用: {sorted(known)}")
        try:
            result[name] = float(value)
        except ValueError:
            raise ModelError(f"容差取值不是数字: {name}={value}") from None
    return result


class ConfigManager:
    """
    配置管理器

    从文件加载配置，叠加环境变量覆盖
    """

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = config_path or DEFAULT_CONFIG_PATH
        self.config = Config()

    def load(self, config_path: Optional[str] = None) -> "ConfigManager":
        """从文件加载配置，文件不存在时保持默认"""
        path = config_path or self.config_path

        if os.path.exists(path):
            with open(path, "r", encoding="utf-8") as f:
                try:
                    data = json.load(f)
                except json.JSONDecodeError as e:
                    raise ModelError(f"配置文件 {path} 不是合法 JSON: 第 {e.lineno} 行第 {e.colno} 列") from None
            self.config = self._from_dict(data)
            logger.debug("已加载配置: %s", path)

        return self

    def apply_env(self, environ: Optional[Dict[str, str]] = None) -> "ConfigManager":
        """应用 SCREWKIN_TOL 覆盖"""
        environ = os.environ if environ is None else environ
        text = environ.get(ENV_TOL)
        if text:
            overrides = parse_tol_overrides(text)
            self.config = self.config.with_tolerances(**overrides)
            logger.debug("环境变量覆盖容差: %s", overrides)
        return self

    def set_k_max(self, k_max: int) -> "ConfigManager":
        if k_max < 1:
            raise ModelError(f"k_max 必须 ≥ 1: {k_max}")
        self.config = replace(self.config, k_max=int(k_max))
        return self

    def set_tolerance(self, name: str, value: float) -> "ConfigManager":
        self.config = self.config.with_tolerances(**parse_tol_overrides(f"{name}={value}"))
        return self

    def save(self, config_path: Optional[str] = None) -> str:
        """保存配置到文件"""
        path = config_path or self.config_path

        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)

        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2)

        return path

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self.config)

    @staticmethod
    def _from_dict(data: Dict[str, Any]) -> Config:
        tol_data = data.get("tolerances", {})
        known = {f.name for f in fields(Tolerances)}
        unknown = set(tol_data) - known
        if unknown:
            raise ModelError(f"配置文件含未知容差: {sorted(unknown)}")
        return Config(
            tolerances=Tolerances(**{k: float(v) for k, v in tol_data.items()}),
            k_max=int(data.get("k_max", 8)),
            pseudoinverse=bool(data.get("pseudoinverse", True)),
            float_digits=int(data.get("float_digits", 17)),
        )


_default: Optional[Config] = None


def get_config() -> Config:
    """进程默认配置（文件 + 环境变量）"""
    global _default
    if _default is None:
        _default = ConfigManager().load().apply_env().config
    return _default


def set_config(config: Optional[Config]) -> None:
    """替换进程默认配置，传 None 则下次重新加载"""
    global _default
    _default = config
