"""多机网络模型API。

负责算例读写、潮流计算、导纳矩阵构造与Kron消去、预想事故三段网络构造，
以及约简网络平衡点求解。得到的ReducedNetwork携带电磁功率表达式中的E_i, G_i, C_ij, D_ij。
"""
import json
import logging
from importlib import resources
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError as PydanticValidationError

from ..context import StudyContext
from ..exceptions import (
    CaseFormatError,
    ContingencyError,
    ConvergenceError,
    InconsistentDispatchError,
    PowerFlowError,
    SingularReductionError,
)
from ..models import CaseData, ContingencySet, ContingencySpec, ReducedNetwork

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BUNDLED_CASE = "ieee9.json"
BUNDLED_CONTINGENCIES = "ieee9_contingencies.csv"

PF_TOLERANCE = 1e-12
PF_MAX_ITER = 30
SEP_TOLERANCE = 1e-12
SEP_CHECK = 1e-8
SEP_MAX_ITER = 50
COND_LIMIT = 1e12


# ==================== 矩阵构造 ====================

def build_ybus(case: CaseData, tripped_line: Optional[Tuple[int, int]] = None) -> np.ndarray:
    """按π型等值构造节点导纳矩阵（不含负荷与发电机）。

    Args:
        case: 算例
        tripped_line: 视为断开的线路

    Returns:
        np.ndarray: 复数矩阵，行列顺序与case.buses一致
    """
    index = case.bus_index()
    n = len(case.buses)
    ybus = np.zeros((n, n), dtype=complex)
    skip = frozenset(tripped_line) if tripped_line is not None else None
    for branch in case.branches:
        if not branch.status or branch.key == skip:
            continue
        f, t = index[branch.from_bus], index[branch.to_bus]
        ys = 1.0 / complex(branch.r, branch.x)
        ysh = 0.5j * branch.b
        ybus[f, f] += ys + ysh
        ybus[t, t] += ys + ysh
        ybus[f, t] -= ys
        ybus[t, f] -= ys
    for k, bus in enumerate(case.buses):
        ybus[k, k] += complex(bus.gs, bus.bs)
    return ybus


def kron_reduce(ybus: np.ndarray, retained: Sequence[int]) -> np.ndarray:
    """Kron消去：Y_RR − Y_RE·Y_EE⁻¹·Y_ER。

    Args:
        ybus: 复数导纳矩阵
        retained: 保留节点下标（按此顺序输出）

    Returns:
        np.ndarray: 约简后的导纳矩阵

    Raises:
        SingularReductionError: 被消去块数值奇异，details为被消去节点
    """
    ybus = np.asarray(ybus, dtype=complex)
    keep = np.asarray(retained, dtype=int)
    drop = np.setdiff1d(np.arange(ybus.shape[0]), keep)
    y_rr = ybus[np.ix_(keep, keep)]
    if drop.size == 0:
        return y_rr.copy()
    y_ee = ybus[np.ix_(drop, drop)]
    if not np.isfinite(y_ee).all() or np.linalg.cond(y_ee) > COND_LIMIT:
        raise SingularReductionError("eliminated block is numerically singular", details=drop.tolist())
    try:
        return y_rr - ybus[np.ix_(keep, drop)] @ np.linalg.solve(y_ee, ybus[np.ix_(drop, keep)])
    except np.linalg.LinAlgError as e:
        raise SingularReductionError(f"eliminated block is singular: {e}", details=drop.tolist()) from e


def power_jacobian(net: ReducedNetwork, delta: np.ndarray) -> np.ndarray:
    """∂P_e/∂δ，形状(m, m)。"""
    theta = delta[:, None] - delta[None, :]
    off = -net.C * np.cos(theta) + net.D * np.sin(theta)
    jac = off.copy()
    np.fill_diagonal(jac, 0.0)
    diag = -off.sum(axis=1)
    if net.infinite_bus:
        diag = diag + net.C0 * np.cos(delta) - net.D0 * np.sin(delta)
    jac[np.diag_indices_from(jac)] = diag
    return jac


def _newton_pf(
    ybus: np.ndarray,
    sbus: np.ndarray,
    v0: np.ndarray,
    pv: np.ndarray,
    pq: np.ndarray,
) -> Tuple[np.ndarray, int]:
    pvpq = np.concatenate([pv, pq])
    va = np.angle(v0)
    vm = np.abs(v0)
    v = v0.copy()
    for it in range(PF_MAX_ITER + 1):
        mis = v * np.conj(ybus @ v) - sbus
        f = np.concatenate([mis[pvpq].real, mis[pq].imag])
        if not np.isfinite(f).all():
            raise PowerFlowError("power flow diverged to non-finite values", details={"iteration": it})
        if np.max(np.abs(f), initial=0.0) < PF_TOLERANCE:
            return v, it
        if it == PF_MAX_ITER:
            break
        ibus = ybus @ v
        vnorm = v / np.abs(v)
        ds_dvm = np.diag(v) @ np.conj(ybus @ np.diag(vnorm)) + np.conj(np.diag(ibus)) @ np.diag(vnorm)
        ds_dva = 1j * np.diag(v) @ np.conj(np.diag(ibus) - ybus @ np.diag(v))
        jac = np.block([
            [ds_dva[np.ix_(pvpq, pvpq)].real, ds_dvm[np.ix_(pvpq, pq)].real],
            [ds_dva[np.ix_(pq, pvpq)].imag, ds_dvm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as e:
            raise PowerFlowError(f"singular power flow Jacobian: {e}", details={"iteration": it}) from e
        va[pvpq] += dx[: pvpq.size]
        vm[pq] += dx[pvpq.size:]
        v = vm * np.exp(1j * va)
    raise PowerFlowError(
        f"power flow did not converge in {PF_MAX_ITER} iterations",
        details={"mismatch": float(np.max(np.abs(f)))},
    )


# ==================== API ====================

class NetworkAPI:
    """多机网络模型API类。

    封装算例读写、潮流、网络约简、事故构造与平衡点求解。

    Attributes:
        ctx: 运行上下文
    """

    def __init__(self, ctx: StudyContext):
        """初始化网络模型API。

        Args:
            ctx: StudyContext实例
        """
        self.ctx = ctx

    # ---------- 算例读写 ----------

    def load_case(self, path: Optional[PathLike] = None) -> CaseData:
        """读取算例文件并重新求解潮流（以文件中的电压为初值）。

        Args:
            path: 算例文件路径，None表示内置IEEE 9节点算例

        Returns:
            CaseData: 校验通过、潮流自洽的算例

        Raises:
            CaseFormatError: 文件无法解析，或结构不合法（网络不连通、机组挂在不存在的母线上等）
            PowerFlowError: 潮流不收敛

        Example:
            >>> net_api = NetworkAPI(StudyContext())
            >>> case = net_api.load_case()
            >>> len(case.buses), len(case.branches), len(case.machines)
            (9, 9, 3)
        """
        if path is None:
            source = "bundled:" + BUNDLED_CASE
            text = resources.files("tte_stability.data").joinpath(BUNDLED_CASE).read_text(encoding="utf-8")
        else:
            source = str(path)
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as e:
                raise CaseFormatError(f"cannot read case file {source}: {e}") from e
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise CaseFormatError(
                f"{source}: invalid JSON at line {e.lineno} column {e.colno}: {e.msg}",
                details={"line": e.lineno, "column": e.colno},
            ) from e
        try:
            case = CaseData.model_validate(raw)
        except PydanticValidationError as e:
            first = e.errors()[0]
            where = ".".join(str(p) for p in first["loc"]) or "<root>"
            raise CaseFormatError(f"{source}: {where}: {first['msg']}", details=e.errors()) from e
        logger.info("loaded case %s from %s", case.name, source)
        return self.solve_power_flow(case, flat_start=False)

    def save_case(self, case: CaseData, path: PathLike) -> Path:
        """按tte-stab-case/1格式写出算例，load_case可原样读回。"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(case.model_dump(by_alias=True), indent=2), encoding="utf-8")
        return path

    def load_contingencies(self, path: Optional[PathLike] = None) -> List[ContingencySpec]:
        """读取事故列表CSV（id, fault_bus, line_from, line_to[, reference_cct]）。

        Args:
            path: 文件路径，None表示内置的12个N−1事故

        Returns:
            List[ContingencySpec]: 按文件顺序
        """
        try:
            if path is None:
                with resources.files("tte_stability.data").joinpath(BUNDLED_CONTINGENCIES).open("r") as fh:
                    frame = pd.read_csv(fh)
            else:
                frame = pd.read_csv(path)
        except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise CaseFormatError(f"cannot read contingency list {path}: {e}") from e
        missing = {"id", "fault_bus", "line_from", "line_to"} - set(frame.columns)
        if missing:
            raise CaseFormatError(f"contingency list lacks columns {sorted(missing)}")
        specs = []
        for row, rec in enumerate(frame.to_dict("records"), start=2):
            ref = rec.get("reference_cct")
            try:
                specs.append(
                    ContingencySpec(
                        id=int(rec["id"]),
                        fault_bus=int(rec["fault_bus"]),
                        line_from=int(rec["line_from"]),
                        line_to=int(rec["line_to"]),
                        reference_cct=None if ref is None or pd.isna(ref) else float(ref),
                    )
                )
            except (ValueError, TypeError) as e:
                raise CaseFormatError(f"contingency list line {row}: {e}", details={"line": row}) from e
        return specs

    # ---------- 潮流 ----------

    def solve_power_flow(self, case: CaseData, flat_start: bool = False) -> CaseData:
        """牛顿-拉夫逊极坐标潮流，机组1所在母线为平衡母线，其余机组母线为PV母线。

        Args:
            case: 算例
            flat_start: 为True时从平启动（PV/平衡母线取给定电压幅值、相角0）

        Returns:
            CaseData: 更新了母线电压与平衡机机械功率的新算例

        Raises:
            PowerFlowError: 潮流发散或雅可比奇异
        """
        index = case.bus_index()
        ybus = build_ybus(case)
        load = np.array([complex(b.pd, b.qd) for b in case.buses])
        sbus = -load
        for machine in case.machines[1:]:
            sbus[index[machine.bus]] += machine.pm
        types = np.array([b.type for b in case.buses])
        pv = np.flatnonzero(types == "pv")
        pq = np.flatnonzero(types == "pq")
        vm = np.array([b.vm for b in case.buses])
        va = np.array([b.va for b in case.buses])
        if flat_start:
            vm = np.where(types == "pq", 1.0, vm)
            va = np.zeros_like(va)
        slack = index[case.machines[0].bus]
        va = va - va[slack]
        v, iterations = _newton_pf(ybus, sbus, vm * np.exp(1j * va), pv, pq)
        logger.debug("power flow converged in %d iterations", iterations)

        s_slack = v[slack] * np.conj(ybus[slack] @ v) + load[slack]
        buses = [
            bus.model_copy(update={"vm": float(abs(v[k])), "va": float(np.angle(v[k]))})
            for k, bus in enumerate(case.buses)
        ]
        machines = list(case.machines)
        machines[0] = machines[0].model_copy(update={"pm": float(s_slack.real)})
        return case.model_copy(update={"buses": buses, "machines": machines})

    def redispatch(self, case: CaseData, changes_mw: Dict[int, float]) -> CaseData:
        """修改机组机械功率后平启动重算潮流，平衡机承担差额。

        Args:
            case: 算例
            changes_mw: 机组编号（从1开始）到新机械功率（MW）的映射

        Returns:
            CaseData: 重新求解潮流的新算例

        Raises:
            ContingencyError: 机组编号不存在或试图指定平衡机出力
            PowerFlowError: 新出力下潮流不收敛

        Example:
            >>> stressed = net_api.redispatch(case, {2: 200.0, 3: 100.0})
            >>> stressed.machines[0].pm * stressed.base_mva  # 约22.55 MW
        """
        machines = list(case.machines)
        for number, mw in changes_mw.items():
            if not 1 <= number <= len(machines):
                raise ContingencyError(f"no machine {number} in case {case.name}")
            if number == 1:
                raise ContingencyError("machine 1 is the slack machine; its output follows from the power flow")
            machines[number - 1] = machines[number - 1].model_copy(update={"pm": mw / case.base_mva})
        logger.info("re-dispatch %s: %s MW", case.name, changes_mw)
        return self.solve_power_flow(case.model_copy(update={"machines": machines}), flat_start=True)

    # ---------- 网络约简 ----------

    def reduce_network(
        self,
        case: CaseData,
        grounded_bus: Optional[int] = None,
        tripped_line: Optional[Tuple[int, int]] = None,
    ) -> ReducedNetwork:
        """把网络约简到发电机内节点，得到电磁功率表达式的系数。

        负荷按潮流电压折算为恒定导纳，发电机为x'd后的内电势。
        内电势与机械功率总是取自故障前潮流；故障母线在消去前删去其行列，切除线路不计入导纳矩阵。

        Args:
            case: 潮流自洽的算例
            grounded_bus: 三相金属性接地的母线
            tripped_line: 切除的线路

        Returns:
            ReducedNetwork: m维约简网络，delta0为潮流对应的内电势相角

        Raises:
            ContingencyError: 接地母线或切除线路不存在
            SingularReductionError: 消去块奇异
        """
        index = case.bus_index()
        if grounded_bus is not None and grounded_bus not in index:
            raise ContingencyError(f"fault bus {grounded_bus} not in case")
        if tripped_line is not None:
            try:
                case.find_branch(*tripped_line)
            except KeyError as e:
                raise ContingencyError(str(e.args[0])) from e

        n, m = len(case.buses), len(case.machines)
        ybus = build_ybus(case)
        v = np.array([b.vm * np.exp(1j * b.va) for b in case.buses])
        load = np.array([complex(b.pd, b.qd) for b in case.buses])
        s_inj = v * np.conj(ybus @ v) + load
        gen_bus = np.array([index[mc.bus] for mc in case.machines])
        xd = np.array([mc.xd_prime for mc in case.machines])
        s_gen = s_inj[gen_bus]
        i_gen = np.conj(s_gen / v[gen_bus])
        emf = v[gen_bus] + 1j * xd * i_gen

        with self.ctx.guard("network reduction"):
            full = np.zeros((n + m, n + m), dtype=complex)
            full[:n, :n] = build_ybus(case, tripped_line)
            full[np.arange(n), np.arange(n)] += np.conj(load) / np.abs(v) ** 2
            y_gen = 1.0 / (1j * xd)
            internal = n + np.arange(m)
            full[internal, internal] += y_gen
            full[gen_bus, gen_bus] += y_gen
            full[internal, gen_bus] -= y_gen
            full[gen_bus, internal] -= y_gen
            keep_rows = np.arange(n + m)
            retained = internal
            if grounded_bus is not None:
                g = index[grounded_bus]
                keep_rows = np.delete(keep_rows, g)
                full = full[np.ix_(keep_rows, keep_rows)]
                retained = internal - 1
            y_red = kron_reduce(full, retained)

        mag = np.abs(emf)
        outer = np.outer(mag, mag)
        coupling_c = outer * y_red.imag
        coupling_d = outer * y_red.real
        coupling_c = 0.5 * (coupling_c + coupling_c.T)
        coupling_d = 0.5 * (coupling_d + coupling_d.T)
        np.fill_diagonal(coupling_c, 0.0)
        np.fill_diagonal(coupling_d, 0.0)

        if grounded_bus is not None:
            label = f"fault_on@{grounded_bus}"
        elif tripped_line is not None:
            label = f"postfault-{tripped_line[0]}-{tripped_line[1]}"
        else:
            label = "prefault"
        return ReducedNetwork(
            label=label,
            m=m,
            E=mag,
            G=y_red.diagonal().real,
            C=coupling_c,
            D=coupling_d,
            H=[mc.h for mc in case.machines],
            Dmp=[mc.d for mc in case.machines],
            Pm=s_gen.real,
            omega_s=case.omega_s,
            delta0=np.angle(emf),
        )

    # ---------- 平衡点 ----------

    def solve_sep(
        self,
        net: ReducedNetwork,
        guess: Optional[Sequence[float]] = None,
        frame: Optional[str] = None,
    ) -> np.ndarray:
        """牛顿法求约简网络的稳定平衡点。

        无无穷大母线时固定机组1的相角，在m−1个相对坐标上迭代；
        coi坐标下的方程为各机单位惯量加速功率相等，最后在全部m个方程上校验残差。

        Args:
            net: 约简网络
            guess: 初值（rad），默认取net.delta0
            frame: coi或absolute，默认无无穷大母线时为coi

        Returns:
            np.ndarray: 平衡点相角（rad）

        Raises:
            InconsistentDispatchError: 总机械功率无法被网络吸收，或残差校验失败
            ConvergenceError: 50次迭代内不收敛
        """
        frame = frame or ("absolute" if net.infinite_bus else "coi")
        delta = np.array(net.delta0 if guess is None else guess, dtype=float)
        if delta.shape != (net.m,):
            raise ConvergenceError(f"guess must have {net.m} angles")

        if not net.infinite_bus:
            self._check_dispatch(net)

        def residual(d: np.ndarray) -> np.ndarray:
            acc = net.Pm - net.electrical_power(d)
            if frame == "coi":
                acc = acc - net.H * acc.sum() / net.H.sum()
            return acc

        def jacobian(d: np.ndarray) -> np.ndarray:
            jac = -power_jacobian(net, d)
            if frame == "coi":
                jac = jac - np.outer(net.H, jac.sum(axis=0)) / net.H.sum()
            return jac

        free = np.arange(net.m) if net.infinite_bus else np.arange(1, net.m)
        with self.ctx.guard("equilibrium solve"):
            for it in range(SEP_MAX_ITER + 1):
                r = residual(delta)
                if not np.isfinite(r).all():
                    raise ConvergenceError("equilibrium iteration produced non-finite residual")
                if np.max(np.abs(r[free]), initial=0.0) < SEP_TOLERANCE:
                    break
                if it == SEP_MAX_ITER:
                    raise ConvergenceError(
                        f"equilibrium solve did not converge in {SEP_MAX_ITER} iterations",
                        details={"residual": float(np.max(np.abs(r)))},
                    )
                jac = jacobian(delta)[np.ix_(free, free)]
                delta[free] += np.linalg.solve(jac, -r[free])

        worst = float(np.max(np.abs(residual(delta))))
        if worst >= SEP_CHECK:
            raise InconsistentDispatchError(
                f"equilibrium residual {worst:.3e} pu exceeds {SEP_CHECK:g}", details={"angles": delta.tolist()}
            )
        if frame == "coi":
            imbalance = float((net.Pm - net.electrical_power(delta)).sum())
            if abs(imbalance) > self.ctx.config.max_imbalance:
                raise InconsistentDispatchError(f"net accelerating power {imbalance:.3f} pu at the equilibrium")
        logger.debug("%s equilibrium found after %d iterations", net.label, it)
        return delta

    def _check_dispatch(self, net: ReducedNetwork) -> None:
        # Σ P_e = Σ E²G + 2Σ_{i<j} D_ij cos θ_ij
        swing = float(np.abs(net.D).sum())
        offset = float(net.Pm.sum() - net.self_power.sum())
        if abs(offset) - swing > self.ctx.config.max_imbalance:
            raise InconsistentDispatchError(
                f"total mechanical power cannot be absorbed: mismatch {offset:.3f} pu, coupling range ±{swing:.3f} pu",
                details={"mismatch": offset, "range": swing},
            )

    # ---------- 预想事故 ----------

    def build_contingency(
        self,
        case: CaseData,
        fault_bus: int,
        tripped_line: Tuple[int, int],
        contingency_id: int = 0,
    ) -> ContingencySet:
        """构造一次N−1切线事故的故障前、故障中、故障后网络。

        Args:
            case: 潮流自洽的算例
            fault_bus: 故障母线，必须是被切线路的端点
            tripped_line: 被切线路
            contingency_id: 事故编号

        Returns:
            ContingencySet: 含故障后平衡点（以故障前平衡点为初值求得）

        Raises:
            ContingencyError: 故障母线不在线路端点，或线路不存在

        Example:
            >>> cont = net_api.build_contingency(case, 4, (4, 6), contingency_id=1)
            >>> cont.postfault.label
            'postfault-4-6'
        """
        line = (int(tripped_line[0]), int(tripped_line[1]))
        if fault_bus not in line:
            raise ContingencyError(
                f"fault bus {fault_bus} is not an endpoint of line {line[0]}-{line[1]}",
                details={"fault_bus": fault_bus, "line": line},
            )
        prefault = self.reduce_network(case)
        fault_on = self.reduce_network(case, grounded_bus=fault_bus)
        postfault = self.reduce_network(case, tripped_line=line)
        postfault_sep = self.solve_sep(postfault, prefault.delta0)
        logger.info("contingency %d: fault at bus %d, trip %d-%d", contingency_id, fault_bus, *line)
        return ContingencySet(
            id=contingency_id,
            fault_bus=fault_bus,
            tripped_line=line,
            prefault=prefault,
            fault_on=fault_on,
            postfault=postfault,
            prefault_sep=prefault.delta0,
            postfault_sep=postfault_sep,
        )

    def build_contingencies(
        self, case: CaseData, specs: Sequence[ContingencySpec]
    ) -> List[ContingencySet]:
        """按事故列表批量构造，结果与输入顺序一致。"""
        return self.ctx.map_ordered(
            lambda spec: self.build_contingency(case, spec.fault_bus, (spec.line_from, spec.line_to), spec.id),
            specs,
        )

