"""稳定边界搜索API。

沿状态空间中的单位方向n，从平衡点x_ep出发逐段仿真，找到(x_ep + l·n)位于稳定边界上的距离l：
稳定则l += s（s < ε时返回l），失稳则s减半并后退 l −= s。
多个方向同步推进，每轮一次批量积分。
"""
import logging
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd

from ..context import StudyContext
from ..exceptions import SearchLimitError, ValidationError
from ..models import (
    ORIGINAL,
    BoundaryResult,
    ContingencySpec,
    CaseData,
    Order,
    SearchConfig,
    TteSystem,
)
from .network import NetworkAPI
from .simulator import SimulatorAPI

logger = logging.getLogger(__name__)

CONSERVATIVE_ORDERS = frozenset({3, 4, 7, 8})
OPTIMISTIC_ORDERS = frozenset({2, 5, 6, 9})
QUANTILES = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)
CAMPAIGN_COLUMNS = ["direction_index", "order", "l_star", "ratio", "evaluations", "outcome"]


def sample_directions(count: int, dim: int, seed: int, mode: str = "sphere") -> np.ndarray:
    """生成可复现的单位方向。

    Args:
        count: 方向个数，≥ 1
        dim: 状态空间维数2m
        seed: 随机种子
        mode: sphere为球面均匀（标准正态分量归一化），orthant为[0,1)均匀分量归一化

    Returns:
        np.ndarray: 形状(count, dim)，每行范数为1

    Example:
        >>> sample_directions(3, 6, seed=42).shape
        (3, 6)
    """
    if count < 1 or dim < 1:
        raise ValidationError("count and dim must be at least 1")
    rng = np.random.default_rng(seed)
    if mode == "sphere":
        raw = rng.standard_normal((count, dim))
    elif mode == "orthant":
        raw = rng.random((count, dim))
    else:
        raise ValidationError(f"unknown direction mode {mode!r}")
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


class BoundaryAPI:
    """稳定边界搜索API类。

    Attributes:
        ctx: 运行上下文
        sim: 仿真API
        network: 网络模型API
    """

    def __init__(self, ctx: StudyContext):
        """初始化边界搜索API。

        Args:
            ctx: StudyContext实例
        """
        self.ctx = ctx
        self.sim = SimulatorAPI(ctx)
        self.network = NetworkAPI(ctx)

    def search_batch(
        self,
        system: TteSystem,
        directions: np.ndarray,
        cfg: Optional[SearchConfig] = None,
    ) -> List[BoundaryResult]:
        """对一批方向同步执行边界搜索。

        超过l_max仍稳定或仿真次数达到上限的方向记为undetectable，
        l_star为最后的稳定距离。

        Args:
            system: 在平衡点展开的系统，x_ep取其展开点
            directions: 单位方向，形状(k, 2m)
            cfg: 搜索参数，默认由运行配置生成

        Returns:
            List[BoundaryResult]: 与directions逐行对应
        """
        cfg = cfg or self.ctx.config.search_config()
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if directions.shape[1] != system.dim:
            raise ValidationError(f"directions must have dimension {system.dim}")
        k = directions.shape[0]
        origin = system.sep_state()
        l = np.full(k, cfg.l0)
        s = np.full(k, cfg.s0)
        last_unstable = np.full(k, np.nan)
        evaluations = np.zeros(k, dtype=int)
        outcome = np.full(k, "", dtype=object)

        while True:
            live = np.flatnonzero(outcome == "")
            if live.size == 0:
                break
            x0 = origin + l[live, None] * directions[live]
            traj = self.sim.integrate(
                system, x0, cfg.horizon, cfg.dt, record=False, divergence_limit=cfg.divergence_limit
            )
            stable = np.atleast_1d(
                self.sim.classify_stable(traj, cfg.spread, cfg.spread_mode, system.expansion_sep)
            )
            evaluations[live] += 1
            for row, ok in zip(live, stable):
                if ok:
                    if s[row] < cfg.eps:
                        outcome[row] = "ok"
                    elif l[row] > cfg.l_max:
                        outcome[row] = "undetectable"
                    else:
                        l[row] += s[row]
                else:
                    last_unstable[row] = l[row]
                    s[row] /= 2.0
                    l[row] -= s[row]
                if outcome[row] == "" and evaluations[row] >= cfg.max_simulations:
                    outcome[row] = "undetectable"

        undetectable = int((outcome == "undetectable").sum())
        if undetectable:
            logger.info("%d of %d directions show no detectable instability", undetectable, k)
        return [
            BoundaryResult(
                direction=tuple(float(v) for v in directions[i]),
                l_star=float(l[i]),
                l_unstable=None if np.isnan(last_unstable[i]) else float(last_unstable[i]),
                evaluations=int(evaluations[i]),
                outcome=outcome[i],
            )
            for i in range(k)
        ]

    def search_along(
        self,
        system: TteSystem,
        direction: Sequence[float],
        cfg: Optional[SearchConfig] = None,
    ) -> BoundaryResult:
        """沿单个方向搜索稳定边界。

        返回的l_star满足：x_ep + l_star·n判为稳定，x_ep + (l_star + 2ε)·n判为失稳。

        Args:
            system: 在平衡点展开的系统
            direction: 单位方向（2m维）
            cfg: 搜索参数

        Returns:
            BoundaryResult: outcome为ok

        Raises:
            SearchLimitError: 超过l_max仍稳定或仿真次数超限，details为最后的括区间

        Example:
            >>> result = boundary_api.search_along(smib_original, [1.0, 0.0])
            >>> round(result.l_star, 2)  # 约 π − 2δ_s
            2.09
        """
        direction = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(direction)
        if abs(norm - 1.0) > 1e-12:
            raise ValidationError(f"direction must be a unit vector, got norm {norm}")
        result = self.search_batch(system, direction[None, :], cfg)[0]
        if result.outcome != "ok":
            raise SearchLimitError(
                f"no instability detected along direction after {result.evaluations} simulations",
                details={"l": result.l_star, "unstable": result.l_unstable},
            )
        return result

    def boundary_campaign(
        self,
        case: CaseData,
        contingency: Optional[ContingencySpec] = None,
        orders: Optional[Iterable[Order]] = None,
        count: int = 1000,
        seed: Optional[int] = None,
        cfg: Optional[SearchConfig] = None,
    ) -> pd.DataFrame:
        """随机方向边界搜索并对原系统归一化。

        每个阶数在同一组方向上运行，按阶数分发给上下文并行执行；
        结果按阶数（原系统在前）和方向编号排序，与调度无关。

        Args:
            case: 潮流自洽的算例
            contingency: 事故，None表示在故障前系统上搜索
            orders: TTE阶数（原系统总会参与）
            count: 方向个数
            seed: 随机种子，默认取运行配置
            cfg: 搜索参数

        Returns:
            pd.DataFrame: 列为direction_index, order, l_star, ratio, evaluations, outcome；
                ratio为l_star(order)/l_star(original)，任一侧undetectable时为NaN
        """
        if count < 1:
            raise ValidationError("count must be at least 1")
        cfg = cfg or self.ctx.config.search_config()
        seed = self.ctx.config.seed if seed is None else seed
        orders = [o for o in (orders if orders is not None else self.ctx.config.orders) if o != ORIGINAL]
        if contingency is None:
            net = self.network.reduce_network(case)
            sep = self.network.solve_sep(net)
        else:
            cont = self.network.build_contingency(
                case, contingency.fault_bus, (contingency.line_from, contingency.line_to), contingency.id
            )
            net, sep = cont.postfault, cont.postfault_sep
        directions = sample_directions(count, 2 * net.m, seed, self.ctx.config.direction_mode)
        logger.info("boundary campaign on %s: %d directions, orders %s", net.label, count, orders)

        def run(order: Order) -> List[BoundaryResult]:
            system = self.sim.build_tte_system(net, sep, order)
            return self.search_batch(system, directions, cfg)

        all_orders: List[Order] = [ORIGINAL] + orders
        results = dict(zip(all_orders, self.ctx.map_ordered(run, all_orders)))
        reference = results[ORIGINAL]
        rows = []
        for order in all_orders:
            for idx, (res, ref) in enumerate(zip(results[order], reference)):
                both = res.outcome == "ok" and ref.outcome == "ok"
                rows.append((idx, str(order), res.l_star, res.l_star / ref.l_star if both else np.nan,
                             res.evaluations, res.outcome))
        return pd.DataFrame(rows, columns=CAMPAIGN_COLUMNS)

    @staticmethod
    def campaign_summary(table: pd.DataFrame, bins: int = 20) -> Dict[str, Any]:
        """按阶数统计归一化边界：分位数、直方图与保守/乐观划分的违例数。

        保守阶数（3, 4, 7, 8）比值不小于1、乐观阶数（2, 5, 6, 9）比值小于1计为违例；
        undetectable不计入违例。
        """
        summary: Dict[str, Any] = {}
        for label, group in table.groupby("order", sort=False):
            ratio = group["ratio"].dropna().to_numpy()
            entry: Dict[str, Any] = {
                "directions": int(len(group)),
                "undetectable": int((group["outcome"] == "undetectable").sum()),
            }
            if ratio.size:
                entry["quantiles"] = {str(q): float(np.quantile(ratio, q)) for q in QUANTILES}
                counts, edges = np.histogram(ratio, bins=bins)
                entry["histogram"] = {"counts": counts.tolist(), "edges": edges.tolist()}
            if label != ORIGINAL:
                order = int(label)
                if order in CONSERVATIVE_ORDERS:
                    entry["violations"] = int((ratio >= 1.0).sum())
                elif order in OPTIMISTIC_ORDERS:
                    entry["violations"] = int((ratio < 1.0).sum())
            summary[str(label)] = entry
        return summary
