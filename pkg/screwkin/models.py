"""
模型文件
读取 JSON 连杆模型，校验后展开为运动链与回路系统

圆柱副展开为同轴同点的转动副 + 移动副，模型中的 configs、body_frames
都按展开后的关节变量给出
"""

import os
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from .config import get_config
from .core.chain import Chain, make_chain
from .core.screw import Pose, UnitScrew
from .errors import ModelError
from .mobility import LoopSpec, LoopSystem

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")
MODELS_DIR = os.path.join(DATA_DIR, "models")
MODEL_SCHEMA_PATH = os.path.join(DATA_DIR, "model.schema.json")

# 轴向重新归一化超过此值时告警
AXIS_RENORM_WARN = 1e-6

_schema_cache: Dict[str, Any] = {}


def load_schema(path: str) -> Dict[str, Any]:
    """读取并缓存 JSON schema"""
    if path not in _schema_cache:
        with open(path, "r", encoding="utf-8") as f:
            _schema_cache[path] = json.load(f)
    return _schema_cache[path]


def validate_against(obj: Any, schema_path: str, what: str) -> None:
    """jsonschema 校验，失败时转为 ModelError"""
    try:
        jsonschema.validate(instance=obj, schema=load_schema(schema_path))
    except jsonschema.ValidationError as e:
        location = "/".join(str(p) for p in e.absolute_path) or "<根>"
        raise ModelError(f"{what}不符合 schema（{location}）: {e.message}") from None


def parse_json_text(text: str, source: str = "<输入>") -> Any:
    """解析 JSON，语法错误带行列号"""
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"{source} 不是合法 JSON: 第 {e.lineno} 行第 {e.colno} 列，{e.msg}") from None


def read_json_file(path: str) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ModelError(f"无法读取文件 {path}: {e.strerror}") from None
    return parse_json_text(text, path)


# ==================== 模型 ====================

@dataclass(frozen=True, eq=False)
class Model:
    """
    展开后的模型

    Args:
        name: 模型名
        chain: 全部展开关节组成的链（开链时即机械臂本身）
        loops: 回路系统，开链为 None
        configs: 命名构型，展开关节变量
        entries: 第 e 个模型条目（1 起）对应的展开关节序号（1 起）
        path: 来源文件
        warnings: 加载时产生的告警
    """
    name: str
    chain: Chain
    loops: Optional[LoopSystem] = None
    configs: Dict[str, np.ndarray] = field(default_factory=dict)
    entries: Tuple[Tuple[int, ...], ...] = ()
    path: Optional[str] = None
    warnings: Tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return self.chain.n

    @property
    def closed(self) -> bool:
        return self.loops is not None

    def config(self, label: str) -> np.ndarray:
        """按标签取构型"""
        if label not in self.configs:
            raise ModelError(f"模型 {self.name} 没有构型 {label!r}，可用: {sorted(self.configs)}")
        return self.configs[label].copy()

    def resolve_q(self, text: Optional[str]) -> np.ndarray:
        """
        解析命令行给出的构型

        Args:
            text: 构型标签，或逗号分隔的 n 个数；None 时取 "ref"，没有则为零
        """
        if text is None:
            return self.configs["ref"].copy() if "ref" in self.configs else np.zeros(self.n)
        if text in self.configs:
            return self.config(text)
        try:
            q = parse_vector(text)
        except ModelError:
            raise ModelError(f"未知的构型标签 {text!r}，可用: {sorted(self.configs)}") from None
        return self.chain.check_q(q)

    def summary(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "n_joints": self.n,
            "n_loops": 0 if self.loops is None else self.loops.n_loops,
            "path": self.path,
        }


def parse_vector(text: str) -> np.ndarray:
    """"1,2,3" 或 JSON 数组"""
    text = text.strip()
    try:
        values = json.loads(text) if text.startswith("[") else [float(s) for s in text.split(",")]
        return np.asarray(values, dtype=float).reshape(-1)
    except (ValueError, TypeError):
        raise ModelError(f"无法解析数值向量: {text!r}") from None


def _unit_axis(axis: Sequence[float], where: str, warnings: List[str]) -> np.ndarray:
    e = np.asarray(axis, dtype=float)
    norm = float(np.linalg.norm(e))
    if norm == 0.0:
        raise ModelError(f"{where} 的轴向为零向量")
    if abs(norm - 1.0) > AXIS_RENORM_WARN:
        msg = f"{where} 的轴向已重新归一化（‖e‖ = {norm:.6g}）"
        logger.warning(msg)
        warnings.append(msg)
    return e / norm


def _expand_joint(entry: Dict[str, Any], where: str, warnings: List[str]) -> List[UnitScrew]:
    e = _unit_axis(entry["axis"], where, warnings)
    p = np.asarray(entry.get("point", (0.0, 0.0, 0.0)), dtype=float)
    kind = entry["type"]
    if kind == "revolute":
        return [UnitScrew.revolute(e, p)]
    if kind == "prismatic":
        return [UnitScrew.prismatic(e, p)]
    if kind == "helical":
        return [UnitScrew.helical(e, p, float(entry["pitch"]))]
    # cylindric
    return [UnitScrew.revolute(e, p), UnitScrew.prismatic(e, p)]


def _body_frames(data: Dict[str, Any], n: int) -> Optional[List[Pose]]:
    frames = data.get("body_frames")
    if frames is None:
        return None
    if len(frames) != n:
        raise ModelError(f"body_frames 需要 {n} 个（每个展开关节一个），实际 {len(frames)}")
    poses = []
    for i, M in enumerate(frames, start=1):
        M = np.asarray(M, dtype=float)
        if not np.allclose(M[3], (0.0, 0.0, 0.0, 1.0)):
            raise ModelError(f"body_frames[{i}] 最后一行必须是 (0, 0, 0, 1)")
        R = M[:3, :3]
        err = float(np.linalg.norm(R.T @ R - np.eye(3)))
        if err > get_config().tolerances.tol_orth or np.linalg.det(R) < 0:
            raise ModelError(f"body_frames[{i}] 的旋转部分不是正交矩阵: ‖RᵀR − I‖ = {err:.3e}")
        poses.append(Pose.from_matrix(M))
    return poses


def _build_loops(data: Dict[str, Any], joints: List[UnitScrew],
                 entries: List[Tuple[int, ...]], name: str) -> Optional[LoopSystem]:
    n = len(joints)
    specs = data.get("loops")
    if specs is None:
        if data.get("closed", False):
            return LoopSystem.single(make_chain(joints, name))
        return None

    loops = []
    for l, spec in enumerate(specs, start=1):
        idx = spec["joint_indices"]
        signs = spec.get("signs", [1] * len(idx))
        if len(signs) != len(idx):
            raise ModelError(f"回路 {l} 的 signs 数量 {len(signs)} 与 joint_indices 数量 {len(idx)} 不一致")
        g_idx: List[int] = []
        g_sign: List[float] = []
        for e, s in zip(idx, signs):
            if not 1 <= e <= len(entries):
                raise ModelError(f"回路 {l} 引用了不存在的关节 {e}，有效范围 1..{len(entries)}")
            for j in entries[e - 1]:
                g_idx.append(j - 1)
                g_sign.append(float(s))
        chain = make_chain([joints[j] for j in g_idx], spec.get("name", f"{name}#loop{l}"))
        loops.append(LoopSpec(chain, tuple(g_idx), tuple(g_sign)))
    return LoopSystem(tuple(loops), n)


def build_model(data: Dict[str, Any], path: Optional[str] = None) -> Model:
    """由已解析的 JSON 构造模型"""
    validate_against(data, MODEL_SCHEMA_PATH, "模型文件")
    name = data["name"]
    warnings: List[str] = []
    joints: List[UnitScrew] = []
    entries: List[Tuple[int, ...]] = []
    for k, entry in enumerate(data["joints"], start=1):
        expanded = _expand_joint(entry, f"关节 {k}", warnings)
        entries.append(tuple(range(len(joints) + 1, len(joints) + len(expanded) + 1)))
        joints.extend(expanded)

    n = len(joints)
    chain = make_chain(joints, name, _body_frames(data, n))
    loops = _build_loops(data, joints, entries, name)

    configs: Dict[str, np.ndarray] = {}
    for label, values in data.get("configs", {}).items():
        q = np.asarray(values, dtype=float)
        if q.shape != (n,):
            raise ModelError(f"构型 {label!r} 需要 {n} 个展开关节变量，实际 {q.size}")
        configs[label] = q

    logger.debug("模型 %s: %d 个展开关节，%d 个回路", name, n,
                 0 if loops is None else loops.n_loops)
    return Model(name=name, chain=chain, loops=loops, configs=configs,
                 entries=tuple(entries), path=path, warnings=tuple(warnings))


def bundled_models() -> List[str]:
    """随包附带的模型名"""
    return sorted(f[:-5] for f in os.listdir(MODELS_DIR) if f.endswith(".json"))


def load_model(source: str) -> Model:
    """
    加载模型

    Args:
        source: 文件路径，或随包模型名（如 "4c"）

    Raises:
        ModelError: 文件不存在、JSON 语法错误或不符合 schema
    """
    path = source
    if not os.path.isfile(path):
        candidate = os.path.join(MODELS_DIR, f"{source}.json")
        if not os.path.isfile(candidate):
            raise ModelError(f"找不到模型 {source!r}，随包模型: {bundled_models()}")
        path = candidate
    model = build_model(read_json_file(path), path)
    logger.info("已加载模型 %s (%s)", model.name, path)
    return model


def loop_system_from_model(model: Model) -> LoopSystem:
    if model.loops is None:
        raise ModelError(f"模型 {model.name} 是开链，没有回路")
    return model.loops
