"""临界切除时间（CCT）API。

故障中阶段从故障前平衡点出发积分，切除后换成原系统或在故障后平衡点展开的TTE系统继续积分并末端判稳。
故障中轨迹对每个事故只积分一次并缓存，任意切除时刻的状态由缓存状态加一个不足dt的短步得到。
"""
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..context import StudyContext
from ..exceptions import TteStabilityError, ValidationError
from ..models import (
    ORIGINAL,
    CaseData,
    ContingencySet,
    ContingencySpec,
    CctResult,
    Order,
    Trajectory,
    TteSystem,
    order_label,
)
from .network import NetworkAPI
from .simulator import SimulatorAPI

logger = logging.getLogger(__name__)


class FaultOnPath:
    """缓存的故障中轨迹，按切除时刻取状态。

    Attributes:
        system: 故障中系统
        traj: 以dt为步长记录到上限时刻的轨迹
    """

    def __init__(self, sim: SimulatorAPI, system: TteSystem, traj: Trajectory, dt: float):
        self.sim = sim
        self.system = system
        self.traj = traj
        self.dt = dt

    def state_at(self, t_clear: float) -> np.ndarray:
        """切除时刻的状态；超出缓存范围时抛出ValidationError。"""
        if t_clear < 0 or t_clear > self.traj.times[-1] + 1e-12:
            raise ValidationError(f"clearing time {t_clear} outside cached fault-on interval")
        i = min(int(math.floor(t_clear / self.dt + 1e-9)), len(self.traj.times) - 1)
        base = self.traj.states[i]
        rest = t_clear - self.traj.times[i]
        if rest <= 1e-12:
            return np.array(base)
        return np.array(self.sim.integrate(self.system, base, rest, rest, record=False).final_state)


class CctAPI:
    """临界切除时间API类。

    Attributes:
        ctx: 运行上下文
        sim: 仿真API
        network: 网络模型API
    """

    def __init__(self, ctx: StudyContext):
        """初始化CCT API。

        Args:
            ctx: StudyContext实例
        """
        self.ctx = ctx
        self.sim = SimulatorAPI(ctx)
        self.network = NetworkAPI(ctx)

    # ---------- 系统构造 ----------

    def fault_on_system(self, cont: ContingencySet, order: Order) -> TteSystem:
        """故障中系统：默认用原系统；fault_on_mode为tte时在故障前平衡点展开（该点不是故障中网络的平衡点）。"""
        if self.ctx.config.fault_on_mode == "tte" and order != ORIGINAL:
            return self.sim.build_tte_system(cont.fault_on, cont.prefault_sep, order, check_equilibrium=False)
        return self.sim.build_tte_system(cont.fault_on, cont.prefault_sep, ORIGINAL, check_equilibrium=False)

    def postfault_system(self, cont: ContingencySet, order: Order) -> TteSystem:
        return self.sim.build_tte_system(cont.postfault, cont.postfault_sep, order)

    def fault_on_path(self, cont: ContingencySet, order: Order, until: float) -> FaultOnPath:
        system = self.fault_on_system(cont, order)
        start = system.sep_state()
        dt = self.ctx.config.dt
        traj = self.sim.integrate(system, start, until, dt)
        return FaultOnPath(self.sim, system, traj, dt)

    # ---------- 仿真 ----------

    def _stable_from(self, system: TteSystem, states: np.ndarray) -> np.ndarray:
        cfg = self.ctx.config
        traj = self.sim.integrate(system, states, cfg.horizon, cfg.dt, record=False)
        return np.atleast_1d(self.sim.classify_stable(traj, cfg.spread, cfg.spread_mode, system.expansion_sep))

    def simulate_contingency(self, cont: ContingencySet, order: Order, t_clear: float) -> bool:
        """在t_clear切除故障后判断故障后系统是否稳定。

        Args:
            cont: 事故网络
            order: 故障后系统阶数或original
            t_clear: 切除时刻（s），≥ 0

        Returns:
            bool: 末端判稳结果

        Example:
            >>> cct_api.simulate_contingency(cont1, ORIGINAL, 0.32)
            True
        """
        if t_clear < 0:
            raise ValidationError("clearing time must be non-negative")
        state = self.contingency_start(cont, order, t_clear)
        return bool(self._stable_from(self.postfault_system(cont, order), state[None, :])[0])

    def contingency_start(self, cont: ContingencySet, order: Order, t_clear: float) -> np.ndarray:
        """故障切除瞬间的状态（故障后系统的初值）。"""
        system = self.fault_on_system(cont, order)
        start = system.sep_state()
        if t_clear == 0:
            return start
        return np.array(self.sim.integrate(system, start, t_clear, self.ctx.config.dt, record=False).final_state)

    def contingency_trajectory(self, cont: ContingencySet, order: Order, t_clear: float) -> Trajectory:
        """故障中与故障后拼接的完整轨迹，时间从故障发生起算。"""
        cfg = self.ctx.config
        fault_sys = self.fault_on_system(cont, order)
        start = fault_sys.sep_state()
        post_sys = self.postfault_system(cont, order)
        if t_clear > 0:
            during = self.sim.integrate(fault_sys, start, t_clear, cfg.dt)
            times, states = list(during.times), list(during.states)
            clear_state = during.final_state
        else:
            times, states, clear_state = [0.0], [start], start
        after = self.sim.integrate(post_sys, clear_state, cfg.horizon, cfg.dt)
        times += [t_clear + t for t in after.times[1:]]
        states += list(after.states[1:])
        return Trajectory(
            times=times, states=np.stack(states), diverged=after.diverged, infinite_bus=post_sys.base.infinite_bus
        )

    # ---------- CCT ----------

    def find_cct(
        self,
        cont: ContingencySet,
        order: Order,
        tol: Optional[float] = None,
        cap: Optional[float] = None,
        path: Optional[FaultOnPath] = None,
    ) -> CctResult:
        """递增搜索首个失稳切除时刻后二分，给出已知稳定的最大切除时间。

        以escalation_step为步长批量仿真 t = step, 2·step, ..., cap；
        在最后一个稳定点与首个失稳点之间二分到宽度 ≤ tol。

        Args:
            cont: 事故网络
            order: 阶数或original
            tol: 二分容差（s），默认取配置
            cap: 上限（s），默认取配置
            path: 已缓存的故障中轨迹（须覆盖cap）

        Returns:
            CctResult: 上限内无失稳时status为exceeds_cap；计算出错时status为failed
        """
        cfg = self.ctx.config
        tol = cfg.cct_tol if tol is None else tol
        cap = cfg.cct_cap if cap is None else cap
        if not tol > 0 or not cap > 0:
            raise ValidationError("tol and cap must be positive")
        try:
            return self._find_cct(cont, order, tol, cap, path)
        except TteStabilityError as e:
            logger.warning("CCT of contingency %d, %s failed: %s", cont.id, order_label(order), e.message)
            return CctResult(contingency_id=cont.id, order=order, status="failed", message=e.message)

    def _find_cct(
        self, cont: ContingencySet, order: Order, tol: float, cap: float, path: Optional[FaultOnPath]
    ) -> CctResult:
        step = self.ctx.config.escalation_step
        if path is None or path.traj.times[-1] < cap - 1e-12:
            path = self.fault_on_path(cont, order, cap)
        post = self.postfault_system(cont, order)

        grid = list(step * np.arange(1, int(math.floor(cap / step + 1e-9)) + 1))
        if not grid or grid[-1] < cap - 1e-12:
            grid.append(cap)
        points = [0.0] + grid
        stable = self._stable_from(post, np.stack([path.state_at(t) for t in points]))
        evaluations = len(points)
        if not stable[0]:
            return CctResult(
                contingency_id=cont.id, order=order, status="failed", evaluations=evaluations,
                message="unstable without fault duration",
            )
        if stable.all():
            return CctResult(
                contingency_id=cont.id, order=order, status="exceeds_cap", normalized=math.inf,
                evaluations=evaluations,
            )
        first = int(np.argmin(stable))
        lo, hi = points[first - 1], points[first]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            ok = bool(self._stable_from(post, path.state_at(mid)[None, :])[0])
            evaluations += 1
            if ok:
                lo = mid
            else:
                hi = mid
        logger.debug("contingency %d %s: CCT in [%.4f, %.4f]", cont.id, order_label(order), lo, hi)
        return CctResult(contingency_id=cont.id, order=order, cct=lo, evaluations=evaluations)

    def cct_table(
        self,
        case: CaseData,
        contingencies: Sequence[ContingencySpec],
        orders: Optional[Iterable[Order]] = None,
    ) -> pd.DataFrame:
        """计算各事故、各阶数的CCT并对原系统归一化。

        单元格出错不会中断整张表；上限内无失稳的单元格归一化值为inf。

        Args:
            case: 潮流自洽的算例
            contingencies: 事故列表
            orders: TTE阶数，默认取运行配置

        Returns:
            pd.DataFrame: 列为id, fault_bus, tripped_line, reference_cct, original（CCT，s），
                以及各阶的归一化CCT（列名TTE<n>）
        """
        orders = [o for o in (orders if orders is not None else self.ctx.config.orders) if o != ORIGINAL]
        cap = self.ctx.config.cct_cap
        sets = self.network.build_contingencies(case, contingencies)
        paths: Dict[int, FaultOnPath] = {}
        if self.ctx.config.fault_on_mode == "original":
            paths = dict(zip(
                [c.id for c in sets],
                self.ctx.map_ordered(lambda c: self.fault_on_path(c, ORIGINAL, cap), sets),
            ))

        cells: List[Tuple[ContingencySet, Order]] = [(c, o) for c in sets for o in [ORIGINAL] + orders]
        results = self.ctx.map_ordered(lambda cell: self.find_cct(cell[0], cell[1], path=paths.get(cell[0].id)), cells)
        by_cell = {(r.contingency_id, r.order): r for r in results}

        rows = []
        for spec, cont in zip(contingencies, sets):
            base = by_cell[(cont.id, ORIGINAL)]
            row = {
                "id": cont.id,
                "fault_bus": cont.fault_bus,
                "tripped_line": f"{cont.tripped_line[0]}-{cont.tripped_line[1]}",
                "reference_cct": spec.reference_cct,
                ORIGINAL: self._cell_value(base),
            }
            for order in orders:
                row[order_label(order)] = self.normalize(by_cell[(cont.id, order)], base).normalized
            rows.append(row)
        logger.info("CCT table: %d contingencies x %d orders", len(sets), len(orders) + 1)
        return pd.DataFrame(rows)

    @staticmethod
    def _cell_value(result: CctResult) -> float:
        if result.status == "exceeds_cap":
            return math.inf
        return math.nan if result.cct is None else result.cct

    @staticmethod
    def normalize(result: CctResult, original: CctResult) -> CctResult:
        """以原系统CCT归一化；超过上限为inf，任一侧失败为NaN。"""
        if result.status == "exceeds_cap":
            value = math.inf
        elif result.cct is None or original.cct is None:
            value = math.nan
        else:
            value = result.cct / original.cct
        return result.model_copy(update={"normalized": value})

    @staticmethod
    def compare_tables(base: pd.DataFrame, stressed: pd.DataFrame) -> Tuple[pd.DataFrame, pd.DataFrame]:
        """并排比较两张归一化CCT表，并给出各阶平均|1 − 归一化CCT|（只计有限值）。

        Returns:
            Tuple: (按id合并的并排表, 列为order, base, stressed的汇总表)
        """
        orders = [c for c in base.columns if c.startswith("TTE") and c in stressed.columns]
        merged = base.merge(stressed, on="id", suffixes=("_base", "_stressed"))
        rows = []
        for label in orders:
            means = []
            for frame in (base, stressed):
                values = frame[label].to_numpy(dtype=float)
                values = values[np.isfinite(values)]
                means.append(float(np.abs(1.0 - values).mean()) if values.size else math.nan)
            rows.append((label, *means))
        return merged, pd.DataFrame(rows, columns=["order", "base", "stressed"])
