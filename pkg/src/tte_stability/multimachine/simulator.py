"""时域仿真API。

原系统与在平衡点处展开的n阶TTE系统的右端项、定步长四阶龙格-库塔积分与轨迹稳定判别。
状态向量按(δ_1, Δω_1, ..., δ_m, Δω_m)交错排列，所有函数都支持前置批维度，
一批初值可以同步推进。
"""
import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..context import StudyContext
from ..exceptions import NotAnEquilibriumError, ValidationError
from ..models import ORIGINAL, Order, ReducedNetwork, TteSystem, Trajectory
from ..series import horner, pair_coefficient_array
from ..tables import write_table
from .network import power_jacobian

logger = logging.getLogger(__name__)

EQUILIBRIUM_TOLERANCE = 1e-6
COEFFICIENT_COLUMNS = ["pair_i", "pair_j", "k", "e_k"]


def _accelerating(system: TteSystem, power: np.ndarray) -> np.ndarray:
    acc = system.base.Pm - power
    if system.frame == "coi":
        acc = acc - system.base.H * acc.sum(axis=-1, keepdims=True) / system.base.H.sum()
    return acc


def electrical_power(system: TteSystem, delta: np.ndarray) -> np.ndarray:
    """原系统或TTE系统的电磁功率，delta形状(..., m)。"""
    net = system.base
    delta = np.asarray(delta, dtype=float)
    if system.is_original:
        return net.electrical_power(delta)
    x = delta - system.expansion_sep
    pair = horner(system.coeffs, x[..., :, None] - x[..., None, :]).sum(axis=-1)
    power = net.self_power + pair
    if net.infinite_bus:
        power = power + horner(system.coeffs0, x)
    return power


def rhs(system: TteSystem, state: np.ndarray) -> np.ndarray:
    """摆动方程右端项：dδ_i/dt = Δω_i，dΔω_i/dt = −(D_i/2H_i)Δω_i + (ω_s/2H_i)(P_mi − P_ei)。

    Args:
        system: 原系统或TTE系统
        state: 状态，形状(..., 2m)

    Returns:
        np.ndarray: 状态导数，形状与state相同
    """
    state = np.asarray(state, dtype=float)
    delta, omega = state[..., 0::2], state[..., 1::2]
    acc = _accelerating(system, electrical_power(system, delta))
    out = np.empty_like(state)
    out[..., 0::2] = omega
    out[..., 1::2] = -system.base.alpha * omega + system.base.gain * acc
    return out


class SimulatorAPI:
    """时域仿真API类。

    Attributes:
        ctx: 运行上下文
    """

    def __init__(self, ctx: StudyContext):
        """初始化仿真API。

        Args:
            ctx: StudyContext实例
        """
        self.ctx = ctx

    def build_tte_system(
        self,
        net: ReducedNetwork,
        sep: Sequence[float],
        order: Order,
        frame: Optional[str] = None,
        check_equilibrium: bool = True,
    ) -> TteSystem:
        """在平衡点sep处把网络展开为n阶TTE系统（order为original时不展开）。

        每个耦合对 C_ij sin(δ_i − δ_j) + D_ij cos(δ_i − δ_j) 以 θ0 = sep_i − sep_j 展开，
        无穷大母线耦合以 θ0 = sep_i 展开。

        Args:
            net: 约简网络
            sep: 展开平衡点（rad）
            order: 1..15或"original"
            frame: coi或absolute，默认含无穷大母线时为absolute，否则为coi
            check_equilibrium: 是否校验sep为平衡点

        Returns:
            TteSystem: 在(sep, 0)处右端项为零

        Raises:
            NotAnEquilibriumError: sep处加速功率残差超过1e-6 pu
            ValidationError: 阶数或sep维数非法

        Example:
            >>> tte3 = sim_api.build_tte_system(cont.postfault, cont.postfault_sep, 3)
            >>> np.abs(rhs(tte3, tte3.sep_state())).max() < 1e-9
            True
        """
        sep = np.asarray(sep, dtype=float)
        if sep.shape != (net.m,):
            raise ValidationError(f"SEP must have {net.m} angles, got shape {sep.shape}")
        frame = frame or ("absolute" if net.infinite_bus else "coi")
        if order != ORIGINAL and not (isinstance(order, (int, np.integer)) and 1 <= order <= 15):
            raise ValidationError(f"order must be in 1..15 or 'original', got {order!r}")

        if check_equilibrium:
            probe = TteSystem(base=net, order=ORIGINAL, expansion_sep=sep, frame=frame)
            residual = float(np.max(np.abs(_accelerating(probe, net.electrical_power(sep)))))
            if residual > EQUILIBRIUM_TOLERANCE:
                raise NotAnEquilibriumError(
                    f"expansion point is not an equilibrium of {net.label}: residual {residual:.3e} pu",
                    details={"residual": residual},
                )

        if order == ORIGINAL:
            return TteSystem(base=net, order=ORIGINAL, expansion_sep=sep, frame=frame)
        order = int(order)
        theta = sep[:, None] - sep[None, :]
        coeffs = pair_coefficient_array(net.C, net.D, theta, order)
        coeffs0 = pair_coefficient_array(net.C0, net.D0, sep, order) if net.infinite_bus else None
        return TteSystem(base=net, order=order, expansion_sep=sep, frame=frame, coeffs=coeffs, coeffs0=coeffs0)

    def rhs(self, system: TteSystem, state: np.ndarray) -> np.ndarray:
        return rhs(system, state)

    def electrical_power(self, system: TteSystem, delta: np.ndarray) -> np.ndarray:
        return electrical_power(system, delta)

    def jacobian(self, system: TteSystem, state: Sequence[float]) -> np.ndarray:
        """右端项在state处的解析雅可比矩阵，形状(2m, 2m)。

        TTE系统用逐项求导的级数，1阶TTE系统在平衡点处的雅可比即原系统的线性化。
        """
        net = system.base
        state = np.asarray(state, dtype=float)
        delta = state[0::2]
        if system.is_original:
            dpe = power_jacobian(net, delta)
        else:
            k = np.arange(1, system.order + 1).reshape((-1,) + (1,) * (system.coeffs.ndim - 1))
            x = delta - system.expansion_sep
            slope = horner(k * system.coeffs[1:], x[:, None] - x[None, :])
            dpe = -slope
            np.fill_diagonal(dpe, slope.sum(axis=1) - np.diag(slope))
            if net.infinite_bus:
                k0 = np.arange(1, system.order + 1)[:, None]
                dpe[np.diag_indices(net.m)] += horner(k0 * system.coeffs0[1:], x)
        dacc = -dpe
        if system.frame == "coi":
            dacc = dacc - np.outer(net.H, dacc.sum(axis=0)) / net.H.sum()
        m = net.m
        jac = np.zeros((2 * m, 2 * m))
        jac[0::2, 1::2] = np.eye(m)
        jac[1::2, 1::2] = -np.diag(net.alpha)
        jac[1::2, 0::2] = net.gain[:, None] * dacc
        return jac

    def integrate(
        self,
        system: TteSystem,
        x0: np.ndarray,
        horizon: float,
        dt: float,
        record: bool = True,
        record_every: int = 1,
        divergence_limit: Optional[float] = None,
    ) -> Trajectory:
        """经典四阶龙格-库塔定步长积分，最后一步可短于dt以恰好到达horizon。

        x0可带前置批维度，所有行同步推进；出现非有限值或|δ_i|超过发散判据的行
        被标记为发散并冻结在最后的有限状态，全部行发散后提前结束。

        Args:
            system: 原系统或TTE系统
            x0: 初值，形状(..., 2m)
            horizon: 仿真时长T（s）
            dt: 步长（s）
            record: 是否记录中间状态；为False时只保留初末两点
            record_every: 记录间隔（步数）
            divergence_limit: 发散判据（rad），默认取配置值

        Returns:
            Trajectory: states形状(采样数, ..., 2m)

        Raises:
            ValidationError: horizon或dt非正，或x0维数不符
        """
        if not horizon > 0 or not dt > 0:
            raise ValidationError("horizon and dt must be positive")
        if record_every < 1:
            raise ValidationError("record_every must be at least 1")
        limit = self.ctx.config.divergence_limit if divergence_limit is None else divergence_limit
        x0 = np.asarray(x0, dtype=float)
        if x0.shape[-1:] != (system.dim,):
            raise ValidationError(f"initial state must end with dimension {system.dim}")
        batch = x0.shape[:-1]
        x = x0.reshape(-1, system.dim).copy()
        diverged = ~np.isfinite(x).all(axis=1)

        full = int(math.floor(horizon / dt + 1e-9))
        steps = [dt] * full
        rest = horizon - full * dt
        if rest > 1e-12 * horizon:
            steps.append(rest)

        times, states = [0.0], [x.copy()]
        t = 0.0
        with np.errstate(over="ignore", invalid="ignore"):
            for i, h in enumerate(steps, start=1):
                live = np.flatnonzero(~diverged)
                if live.size == 0:
                    logger.debug("all %d trajectories diverged at t=%.4f", x.shape[0], t)
                    break
                xa = x[live]
                k1 = rhs(system, xa)
                k2 = rhs(system, xa + 0.5 * h * k1)
                k3 = rhs(system, xa + 0.5 * h * k2)
                k4 = rhs(system, xa + h * k3)
                new = xa + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                bad = ~np.isfinite(new).all(axis=1) | (np.abs(new[:, 0::2]) > limit).any(axis=1)
                x[live[~bad]] = new[~bad]
                diverged[live[bad]] = True
                t = i * dt if h == dt else horizon
                if record and (i % record_every == 0 or i == len(steps)):
                    times.append(t)
                    states.append(x.copy())
        if times[-1] != t:
            times.append(t)
            states.append(x.copy())

        return Trajectory(
            times=times,
            states=np.stack(states).reshape((len(times),) + batch + (system.dim,)),
            diverged=diverged.reshape(batch),
            infinite_bus=system.base.infinite_bus,
        )

    def classify_stable(
        self,
        traj: Trajectory,
        spread: Optional[float] = None,
        mode: Optional[str] = None,
        sep: Optional[Sequence[float]] = None,
    ) -> Union[bool, np.ndarray]:
        """末端判稳：未发散且 max_i δ_i(T) − min_j δ_j(T) < Δ。

        含无穷大母线时参考角0计入功角差。relative模式用δ − sep代替δ。

        Args:
            traj: 轨迹
            spread: Δ（rad），默认取配置值
            mode: absolute或relative，默认取配置值
            sep: relative模式下的平衡点

        Returns:
            单条轨迹返回bool，批量轨迹返回bool数组
        """
        spread = self.ctx.config.spread if spread is None else spread
        mode = mode or self.ctx.config.spread_mode
        angles = traj.final_angles
        if mode == "relative":
            if sep is None:
                raise ValidationError("relative spread mode needs the SEP")
            angles = angles - np.asarray(sep, dtype=float)
        if traj.infinite_bus:
            angles = np.concatenate([angles, np.zeros(angles.shape[:-1] + (1,))], axis=-1)
        width = angles.max(axis=-1) - angles.min(axis=-1)
        stable = ~traj.diverged & (width < spread)
        return bool(stable) if stable.ndim == 0 else stable

    def hamiltonian(self, system: TteSystem, state: np.ndarray) -> np.ndarray:
        """单机无穷大系统（无阻尼）的能量 ½ω² + (ω_s/2H)∫(P_e − P_m)dδ。

        原系统用三角势能，TTE系统用多项式势能；两者沿无阻尼轨迹守恒。

        Raises:
            ValidationError: 不是含无穷大母线的单机系统
        """
        net = system.base
        if net.m != 1 or not net.infinite_bus:
            raise ValidationError("energy function is defined for the single-machine infinite-bus system only")
        state = np.asarray(state, dtype=float)
        delta, omega = state[..., 0], state[..., 1]
        offset = float(net.self_power[0] - net.Pm[0])
        if system.is_original:
            potential = -net.C0[0] * np.cos(delta) + net.D0[0] * np.sin(delta) + offset * delta
        else:
            x = delta - system.expansion_sep[0]
            k = np.arange(system.order + 1)
            integral = np.concatenate([[0.0], system.coeffs0[:, 0] / (k + 1)])
            potential = horner(integral, x) + offset * x
        return 0.5 * omega**2 + net.gain[0] * potential

    def write_trajectory(self, traj: Trajectory, path: Union[str, Path]) -> Path:
        """导出单条轨迹CSV：t, delta_1..delta_m, domega_1..domega_m。"""
        if traj.states.ndim != 2:
            raise ValidationError("only a single (unbatched) trajectory can be exported")
        m = traj.states.shape[1] // 2
        data = {"t": traj.times}
        for i in range(m):
            data[f"delta_{i + 1}"] = traj.states[:, 2 * i]
        for i in range(m):
            data[f"domega_{i + 1}"] = traj.states[:, 2 * i + 1]
        return write_table(pd.DataFrame(data), path)

    def coefficient_table(self, system: TteSystem) -> pd.DataFrame:
        """TTE系统各耦合对的级数系数，每个(有序对, k)一行：pair_i, pair_j, k, e_k。

        机组编号从1开始，无穷大母线记为pair_j = 0。

        Raises:
            ValidationError: 原系统没有级数系数
        """
        if system.is_original:
            raise ValidationError("the original system has no series coefficients")
        m = system.base.m
        k = np.arange(system.order + 1)
        frames = []
        for i in range(m):
            for j in range(m):
                if i != j:
                    frames.append(pd.DataFrame({"pair_i": i + 1, "pair_j": j + 1, "k": k, "e_k": system.coeffs[:, i, j]}))
            if system.coeffs0 is not None:
                frames.append(pd.DataFrame({"pair_i": i + 1, "pair_j": 0, "k": k, "e_k": system.coeffs0[:, i]}))
        if not frames:
            return pd.DataFrame(columns=COEFFICIENT_COLUMNS)
        return pd.concat(frames, ignore_index=True)
