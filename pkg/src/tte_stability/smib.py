"""单机无穷大（SMIB）系统分析API。

提供TTE系统对不稳定平衡点δ_u1的近似（闭式与数值）、存在性阈值、
不等式链校验与P–δ曲线采样等功能。
"""
import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import bisect

from .context import StudyContext
from .exceptions import NumericalError, ValidationError
from .models import OrderingReport, OrderingViolation, ReducedNetwork, SmibParams, UepEstimate
from .series import horner, pair_coefficient_array

logger = logging.getLogger(__name__)

HALF_PI = math.pi / 2
SCAN_LIMIT = 4 * math.pi
SCAN_STEP = 1e-3
ROOT_XTOL = 1e-10
TANGENCY_TOL = 1e-9
THRESHOLD_XTOL = 1e-4

CONSERVATIVE_CHAIN = (3, 4, 7, 8)
OPTIMISTIC_CHAIN = (2, 5, 6, 9)
PARITY_FAMILIES = ((2, 6), (3, 7), (4, 8), (5, 9))

ParamsLike = Union[SmibParams, float]


def _as_params(p: ParamsLike) -> SmibParams:
    if isinstance(p, SmibParams):
        return p
    try:
        return SmibParams(delta_s=float(p))
    except ValueError as e:
        raise ValidationError(f"invalid delta_s {p!r}: delta_s must lie in (0, pi/2)") from e


def _reduced_poly(delta_s: float, n: int) -> np.ndarray:
    # (Σ_{k=1..n} c_k x^k)/x 的系数，低阶在前
    c = pair_coefficient_array(1.0, 0.0, delta_s, n)
    return c[1:]


def _tte_root(delta_s: float, n: int) -> Optional[float]:
    """TTE功率平衡方程大于0的最小实根，不存在时返回None。"""
    g = _reduced_poly(delta_s, n)
    grid = SCAN_STEP * np.arange(0, int(math.ceil(SCAN_LIMIT / SCAN_STEP)) + 1)
    gv = horner(g, grid)
    fv = grid * gv

    crossing = np.flatnonzero((gv[:-1] * gv[1:] < 0) | (gv[1:] == 0))
    first = int(crossing[0]) if crossing.size else None

    absf = np.abs(fv)
    interior = np.arange(1, grid.size - 1)
    is_min = (absf[interior] <= absf[interior - 1]) & (absf[interior] <= absf[interior + 1])
    same_sign = (gv[interior - 1] * gv[interior] > 0) & (gv[interior] * gv[interior + 1] > 0)
    touching = interior[is_min & same_sign & (absf[interior] < TANGENCY_TOL)]
    if touching.size and (first is None or touching[0] < first):
        logger.debug("order %d at delta_s=%.6f: tangent touch at x=%.6f, UEP vanishes", n, delta_s, grid[touching[0]])
        return None

    def fn(x: float) -> float:
        return float(horner(g, x))

    if first is not None:
        a, b = grid[first], grid[first + 1]
        if gv[first + 1] == 0:
            return float(b)
        return float(bisect(fn, a, b, xtol=ROOT_XTOL))

    # 只有2阶的根可能落在扫描窗口外：唯一正根 2·cot δ_s；高阶的远根是截断伪根
    if n == 2:
        return 2.0 / math.tan(delta_s)
    return None


def smib_network(params: SmibParams) -> ReducedNetwork:
    """把经典摆动方程写成含无穷大母线的单机约简网络。

    取P_max = 1、H = 0.5、ω_s = β，使 D/2H = α、ω_s·P_max/2H = β。

    Args:
        params: SMIB参数

    Returns:
        ReducedNetwork: m = 1、infinite_bus = True的网络，delta0 = δ_s
    """
    return ReducedNetwork(
        label="smib",
        m=1,
        E=[1.0],
        G=[0.0],
        C=[[0.0]],
        D=[[0.0]],
        H=[0.5],
        Dmp=[params.alpha],
        Pm=[math.sin(params.delta_s)],
        omega_s=params.beta,
        delta0=[params.delta_s],
        C0=[1.0],
        D0=[0.0],
        infinite_bus=True,
    )


def claim1_aux(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """δ_u1_TE2 − δ_u1 在变量 x = cos δ_s 下的表达式。"""
    x = np.asarray(x, dtype=float)
    return 2 * np.arccos(x) + 2 * x / np.sqrt(1 - x**2) - math.pi


def claim2_aux(x: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """δ_u1_TE3 − δ_u1 在变量 x = cos δ_s 下的表达式，x = 1 时为 √6 − π。"""
    x = np.asarray(x, dtype=float)
    return 2 * np.arccos(x) + (np.sqrt(9 + 15 * x**2) - 3 * np.sqrt(1 - x**2)) / (2 * x) - math.pi


def claim2_bound() -> float:
    """x < 1/2 时导数符号判据左端的上界，约为1.3744。"""
    x_lo, x_hi = 0.0, 0.5
    return (1 - 4 * x_lo**2) * math.sqrt((1 + 5 * x_hi**2 / 3) / (1 - x_hi**2))


class SmibAPI:
    """单机无穷大系统分析API类。

    封装了所有与SMIB系统TTE近似相关的分析操作。

    Attributes:
        ctx: 运行上下文
    """

    def __init__(self, ctx: StudyContext):
        """初始化SMIB分析API。

        Args:
            ctx: StudyContext实例
        """
        self.ctx = ctx

    def uep_closed_form(self, p: ParamsLike, order: int) -> UepEstimate:
        """用闭式表达式计算2阶或3阶TTE系统的δ_u1近似。

        Args:
            p: SMIB参数或δ_s（rad）
            order: 2或3

        Returns:
            UepEstimate: 对这两个阶数总是存在

        Raises:
            ValidationError: 阶数不是2或3，或δ_s不在(0, π/2)

        Example:
            >>> api = SmibAPI(StudyContext())
            >>> round(api.uep_closed_form(math.pi / 6, 2).value, 5)
            3.9877
        """
        params = _as_params(p)
        ds = params.delta_s
        if order == 2:
            value = ds + 2 * math.cos(ds) / math.sin(ds)
        elif order == 3:
            value = ds + (math.sqrt(9 + 15 * math.cos(ds) ** 2) - 3 * math.sin(ds)) / (2 * math.cos(ds))
        else:
            raise ValidationError(f"closed form exists only for orders 2 and 3, got {order}")
        return UepEstimate.build(order, ds, value)

    def uep_numeric(self, p: ParamsLike, order: int) -> UepEstimate:
        """数值求解TTE功率平衡方程，取大于δ_s的最小根作为δ_u1_TEn。

        在(0, 4π]上以1e-3步长扫描变号区间后二分到1e-10；
        扫描窗口内无根时只有2阶取窗口外的唯一正根2·cot δ_s，其余阶数记为不存在。
        切点（偶重根）视为UEP消失。

        Args:
            p: SMIB参数或δ_s（rad）
            order: TTE阶数，2 ≤ n ≤ 15

        Returns:
            UepEstimate: value为None表示该阶近似UEP不存在

        Raises:
            ValidationError: 阶数越界

        Example:
            >>> api = SmibAPI(StudyContext())
            >>> api.uep_numeric(0.3, 5).present
            False
        """
        if not 2 <= order <= 15:
            raise ValidationError(f"order must be in 2..15, got {order}")
        params = _as_params(p)
        root = _tte_root(params.delta_s, order)
        return UepEstimate.build(order, params.delta_s, None if root is None else params.delta_s + root)

    def existence_threshold(self, order: int) -> float:
        """定位δ_u1_TEn由不存在变为存在的δ_s（5阶约0.401 rad，6阶约0.233 rad）。

        Args:
            order: 5或6

        Returns:
            float: 阈值（rad），二分宽度1e-4

        Raises:
            ValidationError: 阶数不是5或6
            NumericalError: 搜索区间内没有存在性转变
        """
        if order not in (5, 6):
            raise ValidationError(f"existence threshold is defined for orders 5 and 6, got {order}")
        lo, hi = 0.01, HALF_PI - 0.01

        def indicator(ds: float) -> float:
            return 1.0 if _tte_root(ds, order) is not None else -1.0

        if indicator(lo) > 0 or indicator(hi) < 0:
            raise NumericalError(f"no absent-to-present transition for order {order} in [{lo}, {hi}]")
        threshold = float(bisect(indicator, lo, hi, xtol=THRESHOLD_XTOL))
        logger.info("order %d UEP existence threshold: %.4f rad", order, threshold)
        return threshold

    def delta_grid(self, step: float) -> np.ndarray:
        """δ_s网格 {step, 2·step, ...} ∩ (0, π/2)。"""
        if not step > 0:
            raise ValidationError("step must be positive")
        grid = step * np.arange(1, int(math.ceil(HALF_PI / step)) + 1)
        return grid[grid < HALF_PI]

    def sweep_ueps(self, n_list: Iterable[int], step: float) -> pd.DataFrame:
        """在δ_s网格上扫描各阶近似UEP及其误差。

        网格按δ_s分段交给上下文并行执行，输出顺序与调度无关。

        Args:
            n_list: 阶数列表
            step: 网格步长（rad）

        Returns:
            pd.DataFrame: 列为delta_s, order, estimate, error；不存在时estimate与error为NaN
        """
        orders = list(n_list)
        for n in orders:
            if not 2 <= n <= 15:
                raise ValidationError(f"order must be in 2..15, got {n}")
        grid = self.delta_grid(step)
        chunks = np.array_split(grid, max(1, self.ctx.config.threads))

        def run(chunk: np.ndarray) -> List[Tuple[float, int, float, float]]:
            rows = []
            for ds in chunk:
                for n in orders:
                    root = _tte_root(float(ds), n)
                    est = math.nan if root is None else float(ds) + root
                    rows.append((float(ds), n, est, est - (math.pi - float(ds))))
            return rows

        rows = [row for part in self.ctx.map_ordered(run, [c for c in chunks if c.size]) for row in part]
        logger.info("swept %d delta_s points for orders %s", grid.size, orders)
        return pd.DataFrame(rows, columns=["delta_s", "order", "estimate", "error"])

    def check_ordering(self, step: float, tolerance: float = 1e-9) -> OrderingReport:
        """校验保守链 TE3 ≤ TE4 ≤ TE7 ≤ TE8 ≤ δ_u1 与乐观链 TE2 ≥ TE5 ≥ TE6 ≥ TE9 ≥ δ_u1。

        只比较在该δ_s处存在的估计；违例作为数据返回。

        Args:
            step: 网格步长（rad）
            tolerance: 比较容差（rad），吸收二分误差

        Returns:
            OrderingReport: 网格点数、各阶缺失次数与违例列表
        """
        table = self.sweep_ueps(sorted(CONSERVATIVE_CHAIN + OPTIMISTIC_CHAIN), step)
        report = OrderingReport(step=step, points=0)
        absent: Dict[int, int] = {}
        for ds, group in table.groupby("delta_s", sort=True):
            est = dict(zip(group["order"], group["estimate"]))
            for n, v in est.items():
                if math.isnan(v):
                    absent[int(n)] = absent.get(int(n), 0) + 1
            truth = math.pi - ds
            report.violations.extend(self._chain(ds, "conservative", CONSERVATIVE_CHAIN, est, truth, tolerance))
            report.violations.extend(self._chain(ds, "optimistic", OPTIMISTIC_CHAIN, est, truth, tolerance))
            report.points += 1
        report.absent = absent
        if report.violations:
            logger.warning("%d ordering violations on step %.4g grid", len(report.violations), step)
        return report

    @staticmethod
    def _chain(
        ds: float,
        name: str,
        chain: Sequence[int],
        est: Dict[int, float],
        truth: float,
        tolerance: float,
    ) -> List[OrderingViolation]:
        items = [(n, est[n]) for n in chain if not math.isnan(est[n])] + [(0, truth)]
        found = []
        for (lo_n, lo_v), (hi_n, hi_v) in zip(items, items[1:]):
            bad = lo_v > hi_v + tolerance if name == "conservative" else lo_v < hi_v - tolerance
            if bad:
                found.append(
                    OrderingViolation(
                        delta_s=ds, chain=name, left_order=lo_n, right_order=hi_n, left_value=lo_v, right_value=hi_v
                    )
                )
        return found

    def verify_claims(self, step: float) -> Dict[str, int]:
        """按网格校验Claim 1（TE2 > δ_u1）与已证明方向的Claim 2（TE3 < δ_u1）。

        Returns:
            Dict: claim1与claim2的违例个数
        """
        table = self.sweep_ueps([2, 3], step)
        two = table[table["order"] == 2]
        three = table[table["order"] == 3]
        return {
            "claim1": int((~(two["error"] > 0)).sum()),
            "claim2": int((~(three["error"] < 0)).sum()),
        }

    def check_conjecture(self, orders: Iterable[int], step: float, tolerance: float = 1e-9) -> OrderingReport:
        """校验阶数4n、4n−1保守，4n−2、4n−3乐观的猜想（只比较符号）。

        Args:
            orders: 阶数列表（2..15）
            step: 网格步长（rad）
            tolerance: 比较容差（rad）

        Returns:
            OrderingReport: chain为conjecture的违例
        """
        table = self.sweep_ueps(orders, step).dropna()
        violations = []
        for row in table.itertuples(index=False):
            conservative = row.order % 4 in (0, 3)
            truth = math.pi - row.delta_s
            if (conservative and row.estimate > truth + tolerance) or (
                not conservative and row.estimate < truth - tolerance
            ):
                left, right = (int(row.order), 0) if conservative else (0, int(row.order))
                lv, rv = (row.estimate, truth) if conservative else (truth, row.estimate)
                violations.append(
                    OrderingViolation(
                        delta_s=float(row.delta_s), chain="conjecture", left_order=left, right_order=right,
                        left_value=lv, right_value=rv,
                    )
                )
        return OrderingReport(step=step, points=len(self.delta_grid(step)), violations=violations)

    @staticmethod
    def accuracy_summary(table: pd.DataFrame, families: Sequence[Tuple[int, int]] = PARITY_FAMILIES) -> pd.DataFrame:
        """每个奇偶族在共同存在区间上的最大|误差|。

        Args:
            table: sweep_ueps的输出
            families: (低阶, 高阶) 对

        Returns:
            pd.DataFrame: 列为low, high, points, max_err_low, max_err_high
        """
        wide = table.pivot(index="delta_s", columns="order", values="error")
        rows = []
        for low, high in families:
            if low not in wide or high not in wide:
                continue
            both = wide[[low, high]].dropna()
            rows.append(
                (low, high, len(both), float(both[low].abs().max()), float(both[high].abs().max()))
            )
        return pd.DataFrame(rows, columns=["low", "high", "points", "max_err_low", "max_err_high"])

    def pdelta_curve(
        self,
        delta_s: float,
        p_max: float = 1.0,
        orders: Iterable[int] = range(2, 10),
        delta_range: Tuple[float, float] = (0.0, 2 * math.pi),
        samples: int = 721,
    ) -> pd.DataFrame:
        """采样P–δ曲线 P_e = P_max sin δ 及其各阶TTE近似P_en。

        Args:
            delta_s: 稳定平衡点（rad）
            p_max: 最大功率（pu）
            orders: 阶数列表
            delta_range: δ采样区间，须包含δ_s
            samples: 采样点数，≥ 2

        Returns:
            pd.DataFrame: 列为delta, P_e, P_e<n>...
        """
        lo, hi = delta_range
        if samples < 2:
            raise ValidationError("samples must be at least 2")
        if not lo <= delta_s <= hi:
            raise ValidationError("delta range must contain delta_s")
        delta = np.linspace(lo, hi, samples)
        data = {"delta": delta, "P_e": p_max * np.sin(delta)}
        for n in orders:
            coeffs = pair_coefficient_array(p_max, 0.0, delta_s, n)
            data[f"P_e{n}"] = horner(coeffs, delta - delta_s)
        return pd.DataFrame(data)

    def right_intersection(
        self,
        delta_s: float,
        p_max: float,
        order: int,
        delta_range: Tuple[float, float] = (0.0, 2 * math.pi),
        samples: int = 7201,
    ) -> Optional[float]:
        """P_en与P_m = P_max sin δ_s 在δ_s右侧的第一个交点（线性插值），不存在时返回None。"""
        curve = self.pdelta_curve(delta_s, p_max, [order], delta_range, samples)
        right = curve[curve["delta"] > delta_s]
        gap = (right[f"P_e{order}"] - p_max * math.sin(delta_s)).to_numpy()
        x = right["delta"].to_numpy()
        idx = np.flatnonzero(gap[:-1] * gap[1:] <= 0)
        if not idx.size:
            return None
        i = int(idx[0])
        if gap[i] == gap[i + 1]:
            return float(x[i])
        return float(x[i] - gap[i] * (x[i + 1] - x[i]) / (gap[i + 1] - gap[i]))
