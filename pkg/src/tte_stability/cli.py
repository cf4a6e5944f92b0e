"""命令行入口。

tte-stab smib {uep,sweep,thresholds,pdelta,claims}
tte-stab mm {expand,simulate,boundary,cct}

退出码：0成功，1输入校验失败，2数值计算失败。
"""
import argparse
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from . import TteStudy
from .exceptions import ConfigError, ContingencyError, TteStabilityError
from .models import ORIGINAL, ContingencySpec, Order, RunConfig, order_label
from .smib import claim2_aux, claim2_bound
from .tables import write_json, write_table

logger = logging.getLogger("tte_stability")
console = Console()

COMPARE_DISPATCH_MW = {2: 200.0, 3: 100.0}


class _Parser(argparse.ArgumentParser):
    """用法错误按输入校验失败处理（退出码1）。"""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def parse_orders(text: str) -> List[Order]:
    """解析阶数列表："2..9"、"2,3,original"或两者混用。

    Example:
        >>> parse_orders("2..4,original")
        [2, 3, 4, 'original']
    """
    orders: List[Order] = []
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if part == ORIGINAL:
            orders.append(ORIGINAL)
        elif ".." in part:
            lo, hi = part.split("..", 1)
            try:
                orders.extend(range(int(lo), int(hi) + 1))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad order range {part!r}")
        else:
            try:
                orders.append(int(part))
            except ValueError:
                raise argparse.ArgumentTypeError(f"bad order {part!r}")
    for order in orders:
        if order != ORIGINAL and not 1 <= order <= 15:
            raise argparse.ArgumentTypeError(f"order {order} not in 1..15")
    if not orders:
        raise argparse.ArgumentTypeError("empty order list")
    return orders


def parse_order(text: str) -> Order:
    orders = parse_orders(text)
    if len(orders) != 1:
        raise argparse.ArgumentTypeError("exactly one order expected")
    return orders[0]


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    common.add_argument("--out", type=Path, default=None, help="输出目录（默认$TTE_STAB_OUTPUT_DIR或./out）")
    common.add_argument("--threads", type=int, default=1, help="并行线程数")
    common.add_argument("--seed", type=int, default=42, help="随机种子")
    common.add_argument("--case", type=Path, default=None, help="算例文件（默认内置IEEE 9节点）")
    common.add_argument("--contingencies", type=Path, default=None, help="事故列表CSV（默认内置12个事故）")
    common.add_argument("--dt", type=float, default=1e-3, help="积分步长 (s)")
    common.add_argument("--horizon", type=float, default=10.0, help="仿真时长T (s)")
    common.add_argument("--spread", type=float, default=math.pi, help="功角差阈值Δ (rad)")
    common.add_argument("--spread-mode", choices=["absolute", "relative"], default="absolute")
    common.add_argument("--l0", type=float, default=0.1, help="边界搜索初始距离")
    common.add_argument("--s0", type=float, default=0.1, help="边界搜索初始步长")
    common.add_argument("--eps", type=float, default=1e-3, help="边界搜索步长容差")
    common.add_argument("--direction-mode", choices=["sphere", "orthant"], default="sphere")
    common.add_argument("--fault-on-mode", choices=["original", "tte"], default="original")
    common.add_argument("--cct-tol", type=float, default=1e-3, help="CCT容差 (s)")
    common.add_argument("--cct-cap", type=float, default=1.0, help="CCT上限 (s)")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="tte-stab", description="摆动方程TTE近似的稳定性分析")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=_Parser)

    smib = groups.add_parser("smib", help="单机无穷大系统")
    smib_cmds = smib.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = smib_cmds.add_parser("uep", parents=[common], help="近似UEP")
    p.add_argument("--delta-s", type=float, required=True, help="SEP角度 (rad)")
    p.add_argument("--orders", type=parse_orders, default=parse_orders("2..9"))
    p = smib_cmds.add_parser("sweep", parents=[common], help="δ_s网格扫描")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--orders", type=parse_orders, default=parse_orders("2..9"))
    smib_cmds.add_parser("thresholds", parents=[common], help="5、6阶UEP存在性阈值")
    p = smib_cmds.add_parser("pdelta", parents=[common], help="P–δ曲线")
    p.add_argument("--delta-s", type=float, required=True)
    p.add_argument("--pmax", type=float, default=1.0)
    p.add_argument("--orders", type=parse_orders, default=parse_orders("2..9"))
    p = smib_cmds.add_parser("claims", parents=[common], help="不等式链与两个结论的校验")
    p.add_argument("--step", type=float, default=0.001)
    p.add_argument("--extended", action="store_true", help="同时校验10–13阶的猜想")

    mm = groups.add_parser("mm", help="多机系统")
    mm_cmds = mm.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = mm_cmds.add_parser("expand", parents=[common], help="约简网络与TTE系数")
    p.add_argument("--cont", type=int, default=None, help="事故编号（默认故障前网络）")
    p.add_argument("--order", type=parse_order, default=3)
    p = mm_cmds.add_parser("simulate", parents=[common], help="事故轨迹")
    p.add_argument("--cont", type=int, required=True)
    p.add_argument("--order", type=parse_order, default=ORIGINAL)
    p.add_argument("--t-clear", type=float, required=True)
    p = mm_cmds.add_parser("boundary", parents=[common], help="随机方向稳定边界")
    p.add_argument("--cont", type=int, default=None)
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--orders", type=parse_orders, default=parse_orders("2..9"))
    p = mm_cmds.add_parser("cct", parents=[common], help="归一化CCT表")
    p.add_argument("--orders", type=parse_orders, default=parse_orders("2..9"))
    p.add_argument("--compare-tables", action="store_true", help="同时计算再调度后的表并比较")
    return parser


def _config(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, Any] = dict(
        case_path=args.case,
        contingency_path=args.contingencies,
        dt=args.dt,
        horizon=args.horizon,
        spread=args.spread,
        spread_mode=args.spread_mode,
        l0=args.l0,
        s0=args.s0,
        eps=args.eps,
        seed=args.seed,
        direction_mode=args.direction_mode,
        fault_on_mode=args.fault_on_mode,
        cct_tol=args.cct_tol,
        cct_cap=args.cct_cap,
        threads=args.threads,
    )
    if args.out is not None:
        values["output_dir"] = args.out
    orders = getattr(args, "orders", None)
    if orders is not None:
        values["orders"] = orders
    try:
        config = RunConfig(**values)
        config.search_config()
    except PydanticValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"invalid option {'.'.join(str(p) for p in first['loc'])}: {first['msg']}") from e
    return config


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
        force=True,
    )


def _show(frame: pd.DataFrame, title: str, limit: int = 20) -> None:
    table = Table(title=title)
    for column in frame.columns:
        table.add_column(str(column))
    for row in frame.head(limit).itertuples(index=False):
        table.add_row(*(f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    console.print(table)
    if len(frame) > limit:
        console.print(f"... {len(frame) - limit} more rows")


def _int_orders(orders: Sequence[Order]) -> List[int]:
    return [o for o in orders if o != ORIGINAL]


# ==================== smib ====================

def _smib(study: TteStudy, args: argparse.Namespace, out: Path) -> int:
    api = study.smib
    if args.command == "uep":
        rows = []
        for n in _int_orders(args.orders):
            closed = api.uep_closed_form(args.delta_s, n).value if n in (2, 3) else math.nan
            est = api.uep_numeric(args.delta_s, n)
            rows.append({
                "delta_s": args.delta_s,
                "order": n,
                "closed_form": closed,
                "numeric": math.nan if est.value is None else est.value,
                "error": math.nan if est.error is None else est.error,
            })
        frame = pd.DataFrame(rows)
        write_table(frame, out / "smib_uep.csv")
        _show(frame, f"UEP estimates at delta_s = {args.delta_s}")
    elif args.command == "sweep":
        frame = api.sweep_ueps(_int_orders(args.orders), args.step)
        write_table(frame, out / "smib_sweep.csv")
        accuracy = api.accuracy_summary(frame)
        write_table(accuracy, out / "smib_accuracy.csv")
        _show(accuracy, "max |error| on common support")
    elif args.command == "thresholds":
        frame = pd.DataFrame([(n, api.existence_threshold(n)) for n in (5, 6)], columns=["order", "threshold"])
        write_table(frame, out / "smib_thresholds.csv")
        _show(frame, "UEP existence thresholds (rad)")
    elif args.command == "pdelta":
        orders = _int_orders(args.orders)
        frame = api.pdelta_curve(args.delta_s, args.pmax, orders)
        write_table(frame, out / "smib_pdelta.csv")
        cross = pd.DataFrame(
            [(n, api.right_intersection(args.delta_s, args.pmax, n)) for n in orders],
            columns=["order", "intersection"],
        )
        write_table(cross, out / "smib_intersections.csv")
        _show(cross, "P_en = P_m right of delta_s")
    elif args.command == "claims":
        report = api.check_ordering(args.step)
        claims = api.verify_claims(args.step)
        violations = list(report.violations)
        if args.extended:
            violations += api.check_conjecture(range(2, 14), args.step).violations
        frame = pd.DataFrame([v.model_dump() for v in violations], columns=[
            "delta_s", "chain", "left_order", "right_order", "left_value", "right_value",
        ])
        write_table(frame, out / "smib_ordering_violations.csv")
        summary = {
            "step": args.step,
            "points": report.points,
            "absent": report.absent,
            "claims": claims,
            "ordering_violations": len(violations),
            "y_at_1": float(claim2_aux(1.0)),
            "derivative_bound": claim2_bound(),
        }
        write_json(summary, out / "smib_claims.json")
        bad = len(violations) + sum(claims.values())
        console.print(f"{report.points} grid points, {len(violations)} ordering violations, claims {claims}")
        if bad:
            logger.error("%d violations found", bad)
            return 1
    return 0


# ==================== mm ====================

def _spec(study: TteStudy, cont_id: int) -> ContingencySpec:
    specs = study.mm.network.load_contingencies(study.config.contingency_path)
    for spec in specs:
        if spec.id == cont_id:
            return spec
    raise ContingencyError(f"no contingency with id {cont_id}", details={"known": [s.id for s in specs]})


def _mm(study: TteStudy, args: argparse.Namespace, out: Path) -> int:
    mm = study.mm
    case = mm.network.load_case(study.config.case_path)
    if args.command == "expand":
        if args.cont is None:
            net = mm.network.reduce_network(case)
            sep = mm.network.solve_sep(net)
        else:
            spec = _spec(study, args.cont)
            cont = mm.network.build_contingency(case, spec.fault_bus, (spec.line_from, spec.line_to), spec.id)
            net, sep = cont.postfault, cont.postfault_sep
        system = mm.sim.build_tte_system(net, sep, args.order)
        payload = {
            "label": net.label,
            "order": args.order,
            "frame": system.frame,
            "E": net.E, "G": net.G, "C": net.C, "D": net.D,
            "H": net.H, "Dmp": net.Dmp, "Pm": net.Pm,
            "omega_s": net.omega_s,
            "sep": sep,
        }
        write_json(payload, out / "mm_expand.json")
        if not system.is_original:
            write_table(mm.sim.coefficient_table(system), out / "mm_expand.csv")
        console.print(f"{net.label}: m={net.m}, SEP={np.round(sep, 6).tolist()}")
    elif args.command == "simulate":
        spec = _spec(study, args.cont)
        cont = mm.network.build_contingency(case, spec.fault_bus, (spec.line_from, spec.line_to), spec.id)
        traj = mm.cct.contingency_trajectory(cont, args.order, args.t_clear)
        stable = mm.sim.classify_stable(traj, sep=cont.postfault_sep)
        mm.sim.write_trajectory(traj, out / "mm_trajectory.csv")
        console.print(
            f"contingency {spec.id}, {order_label(args.order)}, t_clear={args.t_clear}: "
            f"{'stable' if stable else 'unstable'}"
        )
    elif args.command == "boundary":
        spec = None if args.cont is None else _spec(study, args.cont)
        table = mm.boundary.boundary_campaign(case, spec, args.orders, args.count)
        write_table(table, out / "mm_boundary.csv")
        summary = mm.boundary.campaign_summary(table)
        write_json(summary, out / "mm_boundary_summary.json")
        for label, entry in summary.items():
            if "violations" in entry:
                console.print(f"order {label}: {entry['violations']} partition violations")
    elif args.command == "cct":
        specs = mm.network.load_contingencies(study.config.contingency_path)
        base = mm.cct.cct_table(case, specs, args.orders)
        write_table(base, out / "mm_cct.csv")
        _show(base, "normalized CCT")
        if args.compare_tables:
            stressed_case = mm.network.redispatch(case, COMPARE_DISPATCH_MW)
            stressed = mm.cct.cct_table(stressed_case, specs, args.orders)
            write_table(stressed, out / "mm_cct_redispatch.csv")
            merged, trend = mm.cct.compare_tables(base, stressed)
            write_table(merged, out / "mm_cct_compare.csv")
            write_table(trend, out / "mm_cct_trend.csv")
            _show(trend, "mean |1 - normalized CCT|")
    return 0


def run(argv: Optional[Sequence[str]] = None) -> int:
    """解析命令行并执行，返回退出码。"""
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose)
    try:
        config = _config(args)
        study = TteStudy(config)
        out = config.output_dir
        out.mkdir(parents=True, exist_ok=True)
        if args.group == "smib":
            return _smib(study, args, out)
        return _mm(study, args, out)
    except TteStabilityError as e:
        logger.error("%s: %s", type(e).__name__, e.message)
        if e.details is not None:
            logger.debug("details: %s", e.details)
        return e.exit_code
