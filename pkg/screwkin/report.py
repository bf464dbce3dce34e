"""
分析报告
命令输出统一组装为 JSON 报告，格式固定，相同输入得到逐字节相同的输出
"""

import os
import json
import logging
import math
from dataclasses import asdict
from enum import Enum
from typing import Any, Dict, Iterable, Optional

import numpy as np

from . import __version__
from .config import Config, get_config
from .errors import NumericError
from .models import DATA_DIR, Model, validate_against

logger = logging.getLogger(__name__)

REPORT_SCHEMA_PATH = os.path.join(DATA_DIR, "report.schema.json")


def _round(x: float, digits: int) -> float:
    if not math.isfinite(x):
        raise NumericError(f"报告中出现非有限数值: {x}")
    return float(format(x, f".{digits}g"))


def to_plain(obj: Any, digits: int = 17) -> Any:
    """numpy/dataclass/Enum 转为纯 JSON 结构，浮点按有效数字截断"""
    if isinstance(obj, dict):
        return {str(k): to_plain(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v, digits) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist(), digits)
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj), digits)
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict(), digits)
    return obj


def build_report(command: str, model: Optional[Model], inputs: Dict[str, Any],
                 outputs: Dict[str, Any], warnings: Iterable[str] = (),
                 condition_numbers: Optional[Dict[str, Optional[float]]] = None,
                 config: Optional[Config] = None) -> Dict[str, Any]:
    """
    组装报告并按 schema 校验

    Args:
        condition_numbers: 条件数，无穷大写为 null
    """
    config = config or get_config()
    digits = config.float_digits
    conds = {k: (None if v is None or not math.isfinite(v) else v)
             for k, v in (condition_numbers or {}).items()}
    all_warnings = list(model.warnings) if model is not None else []
    all_warnings.extend(w for w in warnings if w not in all_warnings)
    report = {
        "command": command,
        "model": None if model is None else model.summary(),
        "inputs": inputs,
        "outputs": outputs,
        "diagnostics": {
            "tolerances": asdict(config.tolerances),
            "condition_numbers": conds,
            "warnings": all_warnings,
        },
        "version": __version__,
    }
    report = to_plain(report, digits)
    validate_report(report)
    return report


def validate_report(report: Dict[str, Any]) -> None:
    validate_against(report, REPORT_SCHEMA_PATH, "报告")


def to_json(report: Dict[str, Any]) -> str:
    """确定性序列化：键排序、禁止 NaN"""
    try:
        return json.dumps(report, sort_keys=True, ensure_ascii=False, allow_nan=False, indent=2)
    except ValueError as e:
        raise NumericError(f"报告无法序列化: {e}") from None
