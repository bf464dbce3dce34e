#!/usr/bin/env python3
"""
screwkin 命令行入口

标准输出只有报告 JSON，诊断信息写到标准错误。
退出码: 0 成功，2 模型/输入错误，3 数值失败
"""

import os
import sys
import argparse
import logging
from dataclasses import asdict
from typing import Any, Dict, List, Optional

import numpy as np

from . import __version__
from .config import Config, ConfigManager, set_config
from .core.chain import DerivativeStack, closure_residual, jacobian_spatial, kinematic_map
from .core.derivatives import twist_derivatives_recursive
from .dexterity import (
    condition_number,
    condition_number_2,
    inv_condition_gradient,
    manipulability_mu,
    mu_gradient,
    mu_hessian,
)
from .errors import DerivativeOrderError, ModelError, ScrewkinError
from .ik import ik_derivatives
from .loops import CoordinateSplit, loop_derivatives, taylor_coefficients
from .mobility import ckg_mobility, stratum_cone_membership, tangent_cone_membership
from .models import Model, bundled_models, load_model, parse_json_text, parse_vector, read_json_file
from .report import build_report, to_json
from .representations import Representation, convert_derivatives, twist_derivatives_body
from .taylor import cspace_poly_system, km_taylor_eval, project_to_se3

logger = logging.getLogger("screwkin")


# ==================== 输入解析 ====================

def load_array_arg(text: str) -> Any:
    """参数可以是 JSON 文件路径，也可以是内联 JSON"""
    if os.path.isfile(text):
        return read_json_file(text)
    return parse_json_text(text, "命令行参数")


def load_rows(text: str, width: Optional[int] = None, what: str = "数据") -> np.ndarray:
    data = load_array_arg(text)
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError):
        raise ModelError(f"{what}必须是数值数组") from None
    if arr.ndim == 1:
        arr = arr[:, None] if width == 1 else arr[None]
    if arr.ndim != 2 or (width is not None and arr.shape[1] != width):
        raise ModelError(f"{what}形状应为 (k, {width})，实际 {arr.shape}")
    return arr


def load_stack(text: str, model: Model) -> DerivativeStack:
    """
    导数栈: {"q": 构型或标签, "derivs": [[q̇], [q̈], …]}，或行数组 [q, q̇, …]
    """
    data = load_array_arg(text)
    if isinstance(data, dict):
        if "derivs" not in data:
            raise ModelError("导数栈缺少 derivs 字段")
        q = data.get("q")
        q = model.resolve_q(q) if q is None or isinstance(q, str) else np.asarray(q, dtype=float)
        rows = np.asarray(data["derivs"], dtype=float)
    else:
        arr = np.asarray(data, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise ModelError(f"导数栈至少需要 q 与 q̇ 两行，实际形状 {arr.shape}")
        q, rows = arr[0], arr[1:]
    return DerivativeStack.from_arrays(model.chain.check_q(q), *rows)


def parse_indices(text: str) -> List[int]:
    try:
        return [int(s) for s in text.replace(" ", "").split(",") if s]
    except ValueError:
        raise ModelError(f"无法解析序号列表: {text!r}") from None


def check_order(k: int, config: Config) -> int:
    if k < 1:
        raise DerivativeOrderError(f"阶数必须 ≥ 1: {k}")
    if k > config.k_max:
        raise DerivativeOrderError(f"阶数 {k} 超过上限 k_max = {config.k_max}")
    return k


def require_loops(model: Model):
    if model.loops is None:
        raise ModelError(f"模型 {model.name} 是开链，该命令需要闭环模型")
    return model.loops


# ==================== 子命令 ====================

def cmd_info(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model) if args.model else None
    outputs: Dict[str, Any] = {
        "version": __version__,
        "k_max": config.k_max,
        "pseudoinverse": config.pseudoinverse,
        "float_digits": config.float_digits,
        "tolerances": asdict(config.tolerances),
        "bundled_models": bundled_models(),
    }
    if model is not None:
        outputs["joints"] = [
            {"kind": j.kind.value, "axis": j.e, "point": j.p, "pitch": j.h} for j in model.chain.joints
        ]
        outputs["entries"] = [list(e) for e in model.entries]
        outputs["configs"] = sorted(model.configs)
    return build_report("info", model, {"model": args.model}, outputs, config=config)


def cmd_fk(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    q = model.resolve_q(args.q)
    pose = kinematic_map(model.chain, q, args.link, body_frame=args.body_frame)
    outputs: Dict[str, Any] = {"pose": pose.matrix}
    if model.loops is not None and args.link in (None, model.n):
        outputs["closure_residual"] = closure_residual(model.chain, q)
    inputs = {"q": q, "link": args.link or model.n, "body_frame": args.body_frame}
    return build_report("fk", model, inputs, outputs, config=config)


def cmd_derivs(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    k = check_order(args.order, config)
    state = load_stack(args.stack, model).require(k)
    i = args.link or model.n
    rep = Representation.parse(args.rep)
    if rep is Representation.BODY:
        dV, _ = twist_derivatives_body(model.chain, state, i, k - 1)
    else:
        dV = twist_derivatives_recursive(model.chain, state, k - 1).twists[:, i - 1]
        if rep is Representation.HYBRID:
            pose = kinematic_map(model.chain, state.q, i, body_frame=True)
            dV = convert_derivatives(dV, Representation.SPATIAL, rep, pose)
    inputs = {"q": state.q, "q_derivs": list(state.derivs[:k]), "order": k, "rep": rep.value, "link": i}
    outputs = {"twist_derivs": dV, "twist_orders": list(range(k))}
    return build_report("derivs", model, inputs, outputs, config=config)


def cmd_convert_rep(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    q = model.resolve_q(args.q)
    i = args.link or model.n
    V = load_rows(args.twists, 6, "速度螺旋导数")
    check_order(V.shape[0], config)
    pose = kinematic_map(model.chain, q, i, body_frame=True)
    out = convert_derivatives(V, args.source, args.target, pose)
    inputs = {"q": q, "link": i, "from": args.source, "to": args.target, "twists": V}
    return build_report("convert-rep", model, inputs, {"twist_derivs": out}, config=config)


def cmd_mobility(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    system = require_loops(model)
    q = model.resolve_q(args.q) if (args.q or "ref" in model.configs) else None
    rng = np.random.default_rng(args.seed)
    result = ckg_mobility(system, q, config, samples=args.samples, rng=rng)
    outputs = result.to_dict()
    outputs["flags"] = ["paradoxical-candidate"] if result.paradoxical_candidate else []
    inputs = {"q": q, "samples": args.samples, "seed": args.seed}
    return build_report("mobility", model, inputs, outputs, result.warnings, config=config)


def cmd_cone(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    system = require_loops(model)
    q = model.resolve_q(args.q)
    x = parse_vector(args.x)
    k = check_order(args.order, config)
    if args.rank is None:
        result = tangent_cone_membership(system, q, x, k, config)
    else:
        if system.n_loops != 1:
            raise ModelError("秩分层切锥只支持单回路模型")
        loop = system.loops[0]
        result = stratum_cone_membership(loop.chain, loop.local(q), loop.local(x), args.rank, k, config)
    outputs = result.to_dict()
    outputs["member"] = result.member
    outputs["max_member_order"] = result.max_member_order
    inputs = {"q": q, "x": x, "order": k, "rank": args.rank}
    return build_report("cone", model, inputs, outputs, result.warnings, config=config)


def cmd_ik(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    q = model.resolve_q(args.q)
    V = load_rows(args.twists, 6, "末端速度螺旋导数")
    k = check_order(args.order or V.shape[0], config)
    if V.shape[0] < k:
        raise DerivativeOrderError(f"{k} 阶逆运动学需要 {k} 行速度螺旋导数，只给了 {V.shape[0]} 行")
    rows = parse_indices(args.rows) if args.rows else None
    result = ik_derivatives(model.chain, q, V[:k], rows, config)
    inputs = {"q": q, "twists": V[:k], "order": k, "rows": rows}
    return build_report("ik", model, inputs, result.to_dict(),
                        condition_numbers={"jacobian": result.condition}, config=config)


def cmd_loop_approx(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    system = require_loops(model)
    q = model.resolve_q(args.q)
    split = CoordinateSplit.from_independent(model.n, parse_indices(args.independent))
    U = load_rows(args.u, split.delta, "独立坐标导数")
    K = check_order(args.order or U.shape[0], config)
    if U.shape[0] < K:
        raise DerivativeOrderError(f"{K} 阶近似需要 {K} 行独立坐标导数，只给了 {U.shape[0]} 行")
    solution = loop_derivatives(system, q, split, U[:K], config)
    coeffs = taylor_coefficients(solution)
    outputs = solution.to_dict()
    outputs["taylor_coefficients"] = coeffs
    if args.dt is not None:
        q_next = np.polynomial.polynomial.polyval(args.dt, coeffs)
        outputs["q_approx"] = q_next
        outputs["closure_residuals"] = system.closure_residuals(q_next)
    inputs = {"q": q, "independent": list(split.independent), "u_derivs": U[:K], "order": K, "dt": args.dt}
    return build_report("loop-approx", model, inputs, outputs, config=config)


def cmd_dexterity(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    q = model.resolve_q(args.q)
    J = jacobian_spatial(model.chain, q)
    outputs: Dict[str, Any] = {"mu": manipulability_mu(J)}
    conds: Dict[str, Optional[float]] = {"jacobian_2": condition_number_2(J)}
    warnings: List[str] = []
    try:
        conds["frobenius"] = condition_number(J, config)
    except ScrewkinError as e:
        conds["frobenius"] = None
        warnings.append(str(e))
    if args.grad:
        outputs["mu_gradient"] = mu_gradient(model.chain, q, args.method, config)
        if conds["frobenius"] is not None:
            outputs["inv_condition_gradient"] = inv_condition_gradient(model.chain, q, config)
    if args.hess:
        outputs["mu_hessian"] = mu_hessian(model.chain, q, args.method, config)
    inputs = {"q": q, "grad": args.grad, "hess": args.hess, "method": args.method}
    return build_report("dexterity", model, inputs, outputs, warnings, conds, config)


def cmd_taylor_km(args, config: Config) -> Dict[str, Any]:
    model = load_model(args.model)
    q = model.resolve_q(args.q)
    K = check_order(args.order, config)
    outputs: Dict[str, Any] = {}
    if args.x is not None:
        x = parse_vector(args.x)
        M = km_taylor_eval(model.chain, q, K, x, config)
        exact = kinematic_map(model.chain, q + x).matrix
        outputs["approx"] = M
        outputs["projected"] = project_to_se3(M)
        outputs["error"] = float(np.max(np.abs(M - exact)))
    if args.emit_polys:
        system = cspace_poly_system(model.chain, q, K, config)
        with open(args.emit_polys, "w", encoding="utf-8") as f:
            f.write(system.to_text())
        outputs["n_equations"] = len(system.equations)
        outputs["labels"] = list(system.labels)
        logger.info("多项式方程组已写入 %s", args.emit_polys)
    inputs = {"q": q, "order": K, "x": args.x, "emit_polys": args.emit_polys}
    return build_report("taylor-km", model, inputs, outputs, config=config)


COMMANDS = {
    "info": cmd_info,
    "fk": cmd_fk,
    "derivs": cmd_derivs,
    "convert-rep": cmd_convert_rep,
    "mobility": cmd_mobility,
    "cone": cmd_cone,
    "ik": cmd_ik,
    "loop-approx": cmd_loop_approx,
    "dexterity": cmd_dexterity,
    "taylor-km": cmd_taylor_km,
}


# ==================== 参数 ====================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="screwkin",
        description="screwkin - 基于螺旋理论的高阶运动学分析"
    )
    parser.add_argument("--version", action="version", version=f"screwkin v{__version__}")
    parser.add_argument("--config", metavar="PATH", help="配置文件（JSON），缺省为 ~/.screwkin/config.json")
    parser.add_argument("--verbose", "-v", action="store_true", help="在标准错误输出调试日志")

    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name: str, help_text: str, model_required: bool = True) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        if model_required:
            p.add_argument("model", help="模型文件路径或随包模型名")
        return p

    p = add("info", "版本、容差表与有效配置", model_required=False)
    p.add_argument("model", nargs="?", help="可选：同时列出模型信息")

    p = add("fk", "正运动学")
    p.add_argument("--q", help="构型标签或逗号分隔的关节变量")
    p.add_argument("--link", type=int, help="连杆序号（缺省为末端）")
    p.add_argument("--body-frame", action="store_true", help="输出 C_i = f_i A_i")

    p = add("derivs", "速度螺旋时间导数")
    p.add_argument("--stack", required=True, help="导数栈（JSON 文件或内联 JSON）")
    p.add_argument("--order", type=int, default=1, metavar="K",
                   help="使用导数栈的 q̇ … q^(K)，输出 V、DV … D^(K−1)V 共 K 行")
    p.add_argument("--rep", default="s", help="表示: s/b/h")
    p.add_argument("--link", type=int)

    p = add("convert-rep", "速度螺旋导数在空间/本体/混合表示之间转换")
    p.add_argument("--q")
    p.add_argument("--link", type=int)
    p.add_argument("--from", dest="source", required=True, help="s/b/h")
    p.add_argument("--to", dest="target", required=True, help="s/b/h")
    p.add_argument("--twists", required=True, help="形状 (k, 6) 的导数栈")

    p = add("mobility", "闭包代数与 CKG 自由度")
    p.add_argument("--q", help="用于局部自由度估计的闭环构型")
    p.add_argument("--samples", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)

    p = add("cone", "运动学切锥判定")
    p.add_argument("--q")
    p.add_argument("--x", required=True, help="切向量")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--rank", type=int, help="秩分层：k 阶子式同时为零")

    p = add("ik", "高阶逆运动学")
    p.add_argument("--q")
    p.add_argument("--twists", required=True, help="末端速度螺旋及其导数，形状 (k, 6)")
    p.add_argument("--order", type=int)
    p.add_argument("--rows", help="任务行（1..6），冗余链时选出方阵")

    p = add("loop-approx", "闭环高阶导数与 Taylor 近似")
    p.add_argument("--q")
    p.add_argument("--independent", required=True, help="独立坐标序号，如 4 或 1,3")
    p.add_argument("--u", required=True, help="独立坐标导数，形状 (K, δ)")
    p.add_argument("--dt", type=float)
    p.add_argument("--order", type=int)

    p = add("dexterity", "可操作度与条件数")
    p.add_argument("--q")
    p.add_argument("--grad", action="store_true")
    p.add_argument("--hess", action="store_true")
    p.add_argument("--method", default="auto", choices=["auto", "det", "trace"])

    p = add("taylor-km", "运动学映射的 Taylor 展开")
    p.add_argument("--q")
    p.add_argument("--order", type=int, default=2)
    p.add_argument("--x", help="在 q + x 处比较近似与精确值")
    p.add_argument("--emit-polys", metavar="PATH", help="写出 c-空间局部多项式方程组")

    return parser


def setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        if args.config and not os.path.isfile(args.config):
            raise ModelError(f"配置文件不存在: {args.config}")
        config = ConfigManager(args.config).load().apply_env().config
        set_config(config)
        report = COMMANDS[args.command](args, config)
        text = to_json(report)
    except ScrewkinError as e:
        logger.error("%s", e)
        return e.exit_code

    sys.stdout.write(text + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
