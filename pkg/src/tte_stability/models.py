"""数据模型定义。

包含截断级数、单机无穷大系统、多机网络、仿真、稳定边界搜索与CCT计算的全部数据结构定义。
携带numpy数组的模型在构造后只读，可在并发任务间自由共享。
"""
import math
import os
from pathlib import Path
from typing import Any, Dict, FrozenSet, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

ORIGINAL = "original"
Order = Union[int, Literal["original"]]
CASE_SCHEMA = "tte-stab-case/1"
OUTPUT_DIR_ENV = "TTE_STAB_OUTPUT_DIR"


def _frozen_array(value: Any) -> np.ndarray:
    arr = np.array(value, dtype=float)
    arr.setflags(write=False)
    return arr


def order_label(order: Order) -> str:
    """阶数的文本表示：整数阶为"TTE<n>"，原系统为"original"。"""
    return ORIGINAL if order == ORIGINAL else f"TTE{order}"


# ==================== Series Models ====================

class TruncSeries(BaseModel):
    """单个耦合对的截断泰勒级数。

    表示 C·sin(theta0 + x) + D·cos(theta0 + x) 在 x = 0 处截断到 order 阶的展开。

    Attributes:
        theta0: 展开角（rad）
        order: 截断阶数n
        coeffs: 系数e_0..e_n，e_0为平衡点处的常数项
    """
    model_config = ConfigDict(frozen=True)

    theta0: float = Field(..., description="展开角 (rad)")
    order: int = Field(..., ge=1, description="截断阶数")
    coeffs: Tuple[float, ...] = Field(..., description="系数 e_0..e_n")

    @model_validator(mode="after")
    def _check_length(self) -> "TruncSeries":
        if len(self.coeffs) != self.order + 1:
            raise ValueError(
                f"coeffs must have order+1={self.order + 1} entries, got {len(self.coeffs)}"
            )
        return self


# ==================== SMIB Models ====================

class SmibParams(BaseModel):
    """单机无穷大系统参数，对应经典摆动方程。

    δ̈ + α·δ̇ + β·(sin δ − sin δ_s) = 0

    Attributes:
        delta_s: 稳定平衡点角度（rad），取值(0, π/2)
        alpha: 阻尼系数 D/2H（1/s）
        beta: P_max·ω_s/2H（rad/s²）
    """
    model_config = ConfigDict(frozen=True)

    delta_s: float = Field(..., gt=0.0, lt=math.pi / 2, description="SEP角度 (rad)")
    alpha: float = Field(0.0, ge=0.0, description="阻尼系数 D/2H (1/s)")
    beta: float = Field(1.0, gt=0.0, description="P_max·ω_s/2H (rad/s²)")

    @property
    def delta_u1(self) -> float:
        """最近的不稳定平衡点 π − δ_s。"""
        return math.pi - self.delta_s

    @property
    def delta_u2(self) -> float:
        """另一侧的不稳定平衡点 −π − δ_s。"""
        return -math.pi - self.delta_s


class UepEstimate(BaseModel):
    """n阶TTE系统对δ_u1的近似。

    Attributes:
        order: TTE阶数
        delta_s: 稳定平衡点角度
        value: 近似UEP（rad），不存在时为None
        error: value − (π − δ_s)，不存在时为None
    """
    model_config = ConfigDict(frozen=True)

    order: int = Field(..., description="TTE阶数")
    delta_s: float = Field(..., description="SEP角度 (rad)")
    value: Optional[float] = Field(None, description="近似UEP (rad)")
    error: Optional[float] = Field(None, description="相对π−δ_s的误差 (rad)")

    @model_validator(mode="after")
    def _check_root_side(self) -> "UepEstimate":
        if self.value is not None and not self.value > self.delta_s:
            raise ValueError("UEP estimate must lie to the right of delta_s")
        return self

    @classmethod
    def build(cls, order: int, delta_s: float, value: Optional[float]) -> "UepEstimate":
        error = None if value is None else value - (math.pi - delta_s)
        return cls(order=order, delta_s=delta_s, value=value, error=error)

    @property
    def present(self) -> bool:
        return self.value is not None


class OrderingViolation(BaseModel):
    """一次不等式链违例。

    Attributes:
        delta_s: 违例发生处的δ_s
        chain: 所属链（conservative / optimistic / conjecture）
        left_order: 不等式左侧阶数（0表示真实UEP）
        right_order: 不等式右侧阶数（0表示真实UEP）
        left_value: 左侧数值
        right_value: 右侧数值
    """
    delta_s: float = Field(..., description="δ_s (rad)")
    chain: Literal["conservative", "optimistic", "conjecture"] = Field(..., description="链名")
    left_order: int = Field(..., description="左侧阶数，0为真实UEP")
    right_order: int = Field(..., description="右侧阶数，0为真实UEP")
    left_value: float = Field(..., description="左侧数值")
    right_value: float = Field(..., description="右侧数值")


class OrderingReport(BaseModel):
    """不等式链校验报告。

    Attributes:
        step: 网格步长
        points: 网格点数
        absent: 各阶估计不存在的网格点数
        violations: 违例列表
    """
    step: float = Field(..., description="网格步长 (rad)")
    points: int = Field(..., description="网格点数")
    absent: Dict[int, int] = Field(default_factory=dict, description="各阶缺失次数")
    violations: List[OrderingViolation] = Field(default_factory=list, description="违例")

    @property
    def ok(self) -> bool:
        return not self.violations


# ==================== Network Models ====================

class Bus(BaseModel):
    """母线数据。

    Attributes:
        id: 母线编号
        type: 母线类型（slack / pv / pq）
        vm: 电压幅值（pu）
        va: 电压相角（rad）
        pd: 有功负荷（pu）
        qd: 无功负荷（pu）
        gs: 并联电导（pu）
        bs: 并联电纳（pu）
    """
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., description="母线编号")
    type: Literal["slack", "pv", "pq"] = Field(..., description="母线类型")
    vm: float = Field(1.0, gt=0.0, description="电压幅值 (pu)")
    va: float = Field(0.0, description="电压相角 (rad)")
    pd: float = Field(0.0, description="有功负荷 (pu)")
    qd: float = Field(0.0, description="无功负荷 (pu)")
    gs: float = Field(0.0, description="并联电导 (pu)")
    bs: float = Field(0.0, description="并联电纳 (pu)")


class Branch(BaseModel):
    """支路数据（π型等值）。

    Attributes:
        from_bus: 首端母线
        to_bus: 末端母线
        r: 串联电阻（pu）
        x: 串联电抗（pu）
        b: 总充电电纳（pu）
        status: 是否投运
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    from_bus: int = Field(..., alias="from", description="首端母线")
    to_bus: int = Field(..., alias="to", description="末端母线")
    r: float = Field(0.0, description="串联电阻 (pu)")
    x: float = Field(..., description="串联电抗 (pu)")
    b: float = Field(0.0, description="总充电电纳 (pu)")
    status: bool = Field(True, description="是否投运")

    @property
    def key(self) -> FrozenSet[int]:
        return frozenset((self.from_bus, self.to_bus))

    @property
    def label(self) -> str:
        return f"{self.from_bus}-{self.to_bus}"


class Machine(BaseModel):
    """经典模型发电机数据。

    Attributes:
        bus: 所在母线
        h: 惯性时间常数H（s）
        d: 阻尼系数D（pu转矩/pu转速）
        xd_prime: 暂态电抗x'd（pu）
        pm: 机械功率（pu）
    """
    model_config = ConfigDict(frozen=True)

    bus: int = Field(..., description="所在母线")
    h: float = Field(..., gt=0.0, description="惯性时间常数 H (s)")
    d: float = Field(0.0, ge=0.0, description="阻尼系数 D")
    xd_prime: float = Field(..., gt=0.0, description="暂态电抗 x'd (pu)")
    pm: float = Field(0.0, description="机械功率 (pu)")


class CaseData(BaseModel):
    """多机系统算例数据，携带一组自洽的潮流解。

    Attributes:
        schema_id: 文件格式版本，固定为"tte-stab-case/1"
        name: 算例名称
        base_mva: 基准容量（MVA）
        omega_s: 同步角速度（rad/s）
        buses: 母线列表
        branches: 支路列表
        machines: 发电机列表，第一台所在母线为平衡母线
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    schema_id: Literal["tte-stab-case/1"] = Field(CASE_SCHEMA, alias="schema", description="格式版本")
    name: str = Field("case", description="算例名称")
    base_mva: float = Field(100.0, gt=0.0, description="基准容量 (MVA)")
    omega_s: float = Field(2 * math.pi * 60, gt=0.0, description="同步角速度 (rad/s)")
    buses: List[Bus] = Field(..., min_length=1, description="母线")
    branches: List[Branch] = Field(..., description="支路")
    machines: List[Machine] = Field(..., min_length=1, description="发电机")

    @model_validator(mode="after")
    def _check_structure(self) -> "CaseData":
        ids = [bus.id for bus in self.buses]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate bus id")
        known = set(ids)
        for k, branch in enumerate(self.branches):
            for end in (branch.from_bus, branch.to_bus):
                if end not in known:
                    raise ValueError(f"branch {k} ({branch.label}) references unknown bus {end}")
        seen = set()
        for k, machine in enumerate(self.machines):
            if machine.bus not in known:
                raise ValueError(f"machine {k + 1} references unknown bus {machine.bus}")
            if machine.bus in seen:
                raise ValueError(f"machine {k + 1}: more than one machine on bus {machine.bus}")
            seen.add(machine.bus)
        slack = [bus.id for bus in self.buses if bus.type == "slack"]
        if slack != [self.machines[0].bus]:
            raise ValueError("the single slack bus must host machine 1")

        index = {bus_id: k for k, bus_id in enumerate(ids)}
        live = [b for b in self.branches if b.status]
        rows = [index[b.from_bus] for b in live]
        cols = [index[b.to_bus] for b in live]
        graph = coo_matrix((np.ones(len(live)), (rows, cols)), shape=(len(ids), len(ids)))
        count, _ = connected_components(graph, directed=False)
        if count != 1:
            raise ValueError(f"network is disconnected over in-service branches ({count} islands)")
        return self

    def bus_index(self) -> Dict[int, int]:
        return {bus.id: k for k, bus in enumerate(self.buses)}

    def find_branch(self, a: int, b: int) -> int:
        """按端点查找投运支路的下标，不区分首末端。"""
        target = frozenset((a, b))
        for k, branch in enumerate(self.branches):
            if branch.status and branch.key == target:
                return k
        raise KeyError(f"no in-service branch {a}-{b}")


class ReducedNetwork(BaseModel):
    """Kron消去到发电机内节点后的网络。

    P_ei = E_i²G_i + Σ_j (C_ij sin(δ_i − δ_j) + D_ij cos(δ_i − δ_j))
           + C0_i sin δ_i + D0_i cos δ_i

    最后两项仅在存在无穷大母线（参考角为0）时非零。

    Attributes:
        label: 网络说明（prefault / fault_on / postfault等）
        m: 发电机台数
        E: 内电势幅值（pu）
        G: 自电导G_i（pu）
        C: 耦合系数C_ij = E_iE_jB_ij（对角为0）
        D: 耦合系数D_ij = E_iE_jG_ij（对角为0）
        H: 惯性时间常数（s）
        Dmp: 阻尼系数
        Pm: 机械功率（pu）
        omega_s: 同步角速度（rad/s）
        delta0: 潮流解对应的内电势相角（rad）
        C0: 与无穷大母线的正弦耦合
        D0: 与无穷大母线的余弦耦合
        infinite_bus: 是否含无穷大母线
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    label: str = Field("network", description="网络说明")
    m: int = Field(..., ge=1, description="发电机台数")
    E: np.ndarray = Field(..., description="内电势幅值")
    G: np.ndarray = Field(..., description="自电导")
    C: np.ndarray = Field(..., description="正弦耦合系数")
    D: np.ndarray = Field(..., description="余弦耦合系数")
    H: np.ndarray = Field(..., description="惯性时间常数")
    Dmp: np.ndarray = Field(..., description="阻尼系数")
    Pm: np.ndarray = Field(..., description="机械功率")
    omega_s: float = Field(..., gt=0.0, description="同步角速度")
    delta0: np.ndarray = Field(..., description="初始内电势相角")
    C0: Optional[np.ndarray] = Field(None, description="无穷大母线正弦耦合")
    D0: Optional[np.ndarray] = Field(None, description="无穷大母线余弦耦合")
    infinite_bus: bool = Field(False, description="是否含无穷大母线")

    @field_validator("E", "G", "C", "D", "H", "Dmp", "Pm", "delta0", "C0", "D0", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return None if value is None else _frozen_array(value)

    @model_validator(mode="after")
    def _check_shapes(self) -> "ReducedNetwork":
        m = self.m
        for name in ("E", "G", "H", "Dmp", "Pm", "delta0"):
            if getattr(self, name).shape != (m,):
                raise ValueError(f"{name} must have shape ({m},)")
        for name in ("C", "D"):
            mat = getattr(self, name)
            if mat.shape != (m, m):
                raise ValueError(f"{name} must have shape ({m}, {m})")
            if not np.array_equal(mat, mat.T):
                raise ValueError(f"{name} must be symmetric")
        if np.any(self.H <= 0):
            raise ValueError("inertia constants must be positive")
        if self.C0 is None:
            object.__setattr__(self, "C0", _frozen_array(np.zeros(m)))
        if self.D0 is None:
            object.__setattr__(self, "D0", _frozen_array(np.zeros(m)))
        return self

    @property
    def alpha(self) -> np.ndarray:
        """每台机的 D_i/2H_i。"""
        return self.Dmp / (2.0 * self.H)

    @property
    def gain(self) -> np.ndarray:
        """每台机的 ω_s/2H_i。"""
        return self.omega_s / (2.0 * self.H)

    @property
    def self_power(self) -> np.ndarray:
        """常数项 E_i²G_i。"""
        return self.E**2 * self.G

    def electrical_power(self, delta: np.ndarray) -> np.ndarray:
        """计算电磁功率，支持前置批维度。

        Args:
            delta: 功角，形状(..., m)

        Returns:
            np.ndarray: 电磁功率，形状(..., m)
        """
        delta = np.asarray(delta, dtype=float)
        theta = delta[..., :, None] - delta[..., None, :]
        coupling = (self.C * np.sin(theta) + self.D * np.cos(theta)).sum(axis=-1)
        power = self.self_power + coupling
        if self.infinite_bus:
            power = power + self.C0 * np.sin(delta) + self.D0 * np.cos(delta)
        return power

    def replace(self, **changes: Any) -> "ReducedNetwork":
        """返回替换若干字段后的新网络（重新校验）。"""
        data = {name: getattr(self, name) for name in type(self).model_fields}
        data.update(changes)
        return type(self)(**data)


class ContingencySpec(BaseModel):
    """预想事故定义（事故列表文件的一行）。

    Attributes:
        id: 事故编号
        fault_bus: 故障母线
        line_from: 被切线路首端
        line_to: 被切线路末端
        reference_cct: 参考CCT（s，可选）
    """
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., description="事故编号")
    fault_bus: int = Field(..., description="故障母线")
    line_from: int = Field(..., description="被切线路首端")
    line_to: int = Field(..., description="被切线路末端")
    reference_cct: Optional[float] = Field(None, description="参考CCT (s)")

    @property
    def line_label(self) -> str:
        return f"{self.line_from}-{self.line_to}"


class ContingencySet(BaseModel):
    """一次N−1切线事故的故障前/故障中/故障后三组约简网络。

    Attributes:
        id: 事故编号
        fault_bus: 故障母线
        tripped_line: 被切线路(首端, 末端)
        prefault: 故障前网络
        fault_on: 故障中网络（故障母线接地）
        postfault: 故障后网络（线路已切除）
        prefault_sep: 故障前平衡点（rad）
        postfault_sep: 故障后平衡点（rad）
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    id: int = Field(..., description="事故编号")
    fault_bus: int = Field(..., description="故障母线")
    tripped_line: Tuple[int, int] = Field(..., description="被切线路")
    prefault: ReducedNetwork = Field(..., description="故障前网络")
    fault_on: ReducedNetwork = Field(..., description="故障中网络")
    postfault: ReducedNetwork = Field(..., description="故障后网络")
    prefault_sep: np.ndarray = Field(..., description="故障前平衡点")
    postfault_sep: np.ndarray = Field(..., description="故障后平衡点")

    @field_validator("prefault_sep", "postfault_sep", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)


# ==================== Simulation Models ====================

class TteSystem(BaseModel):
    """原系统或其n阶TTE系统。

    Attributes:
        base: 约简网络
        order: TTE阶数（1..15）或"original"
        expansion_sep: 展开平衡点（rad）
        frame: 参考坐标系，coi为惯量中心坐标，absolute为同步坐标原样
        coeffs: 耦合对级数系数，形状(n+1, m, m)，原系统为None
        coeffs0: 无穷大母线耦合的级数系数，形状(n+1, m)
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    base: ReducedNetwork = Field(..., description="约简网络")
    order: Order = Field(..., description="TTE阶数或original")
    expansion_sep: np.ndarray = Field(..., description="展开平衡点")
    frame: Literal["coi", "absolute"] = Field("coi", description="参考坐标系")
    coeffs: Optional[np.ndarray] = Field(None, description="耦合对级数系数")
    coeffs0: Optional[np.ndarray] = Field(None, description="无穷大母线级数系数")

    @field_validator("expansion_sep", "coeffs", "coeffs0", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> Any:
        return None if value is None else _frozen_array(value)

    @field_validator("order")
    @classmethod
    def _check_order(cls, value: Order) -> Order:
        if value != ORIGINAL and not 1 <= value <= 15:
            raise ValueError("order must be in 1..15 or 'original'")
        return value

    @property
    def is_original(self) -> bool:
        return self.order == ORIGINAL

    @property
    def dim(self) -> int:
        return 2 * self.base.m

    def sep_state(self) -> np.ndarray:
        """展开平衡点对应的交错状态向量(δ_1, 0, δ_2, 0, ...)。"""
        state = np.zeros(self.dim)
        state[0::2] = self.expansion_sep
        return state


class Trajectory(BaseModel):
    """定步长积分得到的轨迹。

    Attributes:
        times: 采样时刻（s）
        states: 状态，形状(采样数, ..., 2m)
        diverged: 发散标志，形状为批维度
        infinite_bus: 是否含无穷大母线（判稳时计入参考角0）
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: np.ndarray = Field(..., description="采样时刻")
    states: np.ndarray = Field(..., description="状态")
    diverged: np.ndarray = Field(..., description="发散标志")
    infinite_bus: bool = Field(False, description="是否含无穷大母线")

    @field_validator("times", "states", mode="before")
    @classmethod
    def _as_array(cls, value: Any) -> np.ndarray:
        return _frozen_array(value)

    @field_validator("diverged", mode="before")
    @classmethod
    def _as_flags(cls, value: Any) -> np.ndarray:
        arr = np.array(value, dtype=bool)
        arr.setflags(write=False)
        return arr

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_angles(self) -> np.ndarray:
        return self.states[-1][..., 0::2]


# ==================== Boundary Models ====================

class SearchConfig(BaseModel):
    """稳定边界搜索参数。

    Attributes:
        l0: 初始距离
        s0: 初始步长
        eps: 步长容差ε
        horizon: 仿真时长T（s）
        spread: 功角差阈值Δ（rad）
        dt: 积分步长（s）
        spread_mode: 功角差判据（absolute原样 / relative相对平衡点）
        divergence_limit: 发散判据（rad）
        l_max: 距离上限，超过仍稳定视为检测不到失稳
        max_simulations: 单方向仿真次数上限
    """
    model_config = ConfigDict(frozen=True)

    l0: float = Field(0.1, gt=0.0, description="初始距离")
    s0: float = Field(0.1, gt=0.0, description="初始步长")
    eps: float = Field(1e-3, gt=0.0, description="步长容差")
    horizon: float = Field(10.0, gt=0.0, description="仿真时长 (s)")
    spread: float = Field(math.pi, gt=0.0, description="功角差阈值 (rad)")
    dt: float = Field(1e-3, gt=0.0, description="积分步长 (s)")
    spread_mode: Literal["absolute", "relative"] = Field("absolute", description="判据模式")
    divergence_limit: float = Field(1e4, gt=0.0, description="发散判据 (rad)")
    l_max: float = Field(50.0, gt=0.0, description="距离上限")
    max_simulations: int = Field(10_000, ge=1, description="仿真次数上限")

    @model_validator(mode="after")
    def _check_tolerance(self) -> "SearchConfig":
        if not self.eps < self.s0:
            raise ValueError("eps must be smaller than s0")
        return self


class BoundaryResult(BaseModel):
    """单个方向的稳定边界。

    Attributes:
        direction: 状态空间单位方向
        l_star: 边界距离（最后一个稳定距离）
        l_unstable: 最近一次判为失稳的距离
        evaluations: 仿真次数
        outcome: ok或undetectable
    """
    direction: Tuple[float, ...] = Field(..., description="单位方向")
    l_star: float = Field(..., description="边界距离")
    l_unstable: Optional[float] = Field(None, description="最近失稳距离")
    evaluations: int = Field(..., description="仿真次数")
    outcome: Literal["ok", "undetectable"] = Field("ok", description="结果类别")

    @model_validator(mode="after")
    def _check(self) -> "BoundaryResult":
        norm = math.sqrt(sum(v * v for v in self.direction))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError("direction must be a unit vector")
        if self.outcome == "ok" and not self.l_star > 0:
            raise ValueError("boundary distance must be positive")
        return self


# ==================== CCT Models ====================

class CctResult(BaseModel):
    """单个事故、单个阶数的临界切除时间。

    Attributes:
        contingency_id: 事故编号
        order: 阶数或original
        cct: CCT（s），超过上限或失败时为None
        status: ok / exceeds_cap / failed
        normalized: cct/cct_original，超过上限为inf
        evaluations: 仿真次数
        message: 失败原因
    """
    contingency_id: int = Field(..., description="事故编号")
    order: Order = Field(..., description="阶数")
    cct: Optional[float] = Field(None, description="CCT (s)")
    status: Literal["ok", "exceeds_cap", "failed"] = Field("ok", description="状态")
    normalized: Optional[float] = Field(None, description="归一化CCT")
    evaluations: int = Field(0, description="仿真次数")
    message: str = Field("", description="失败原因")


# ==================== Run Config ====================

def _default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "out"))


class RunConfig(BaseModel):
    """一次运行的全部配置，各符号常数均在此给出默认值。

    Attributes:
        case_path: 算例文件，None表示内置IEEE 9节点算例
        contingency_path: 事故列表文件，None表示内置的12个N−1事故
        dt: 积分步长（s）
        horizon: 仿真时长T（s）
        spread: 功角差阈值Δ（rad）
        spread_mode: 判稳模式
        divergence_limit: 发散判据（rad）
        l0: 边界搜索初始距离
        s0: 边界搜索初始步长
        eps: 边界搜索步长容差
        l_max: 边界搜索距离上限
        max_simulations: 单方向仿真次数上限
        seed: 随机种子
        direction_mode: 方向分布（sphere球面均匀 / orthant正象限）
        cct_tol: CCT二分容差（s）
        cct_cap: CCT上限（s）
        escalation_step: CCT递增步长（s）
        fault_on_mode: 故障中阶段动力学（original / tte）
        max_imbalance: 允许的总功率不平衡（pu）
        output_dir: 输出目录
        orders: 阶数列表
        threads: 并行线程数
    """
    case_path: Optional[Path] = Field(None, description="算例文件")
    contingency_path: Optional[Path] = Field(None, description="事故列表文件")
    dt: float = Field(1e-3, gt=0.0, description="积分步长 (s)")
    horizon: float = Field(10.0, gt=0.0, description="仿真时长 (s)")
    spread: float = Field(math.pi, gt=0.0, description="功角差阈值 (rad)")
    spread_mode: Literal["absolute", "relative"] = Field("absolute", description="判稳模式")
    divergence_limit: float = Field(1e4, gt=0.0, description="发散判据 (rad)")
    l0: float = Field(0.1, gt=0.0, description="初始距离")
    s0: float = Field(0.1, gt=0.0, description="初始步长")
    eps: float = Field(1e-3, gt=0.0, description="步长容差")
    l_max: float = Field(50.0, gt=0.0, description="距离上限")
    max_simulations: int = Field(10_000, ge=1, description="仿真次数上限")
    seed: int = Field(42, description="随机种子")
    direction_mode: Literal["sphere", "orthant"] = Field("sphere", description="方向分布")
    cct_tol: float = Field(1e-3, gt=0.0, description="CCT容差 (s)")
    cct_cap: float = Field(1.0, gt=0.0, description="CCT上限 (s)")
    escalation_step: float = Field(0.05, gt=0.0, description="CCT递增步长 (s)")
    fault_on_mode: Literal["original", "tte"] = Field("original", description="故障中动力学")
    max_imbalance: float = Field(0.5, gt=0.0, description="总功率不平衡上限 (pu)")
    output_dir: Path = Field(default_factory=_default_output_dir, description="输出目录")
    orders: List[Order] = Field(default_factory=lambda: list(range(2, 10)), description="阶数列表")
    threads: int = Field(1, ge=1, description="并行线程数")

    @field_validator("orders")
    @classmethod
    def _check_orders(cls, value: List[Order]) -> List[Order]:
        for order in value:
            if order != ORIGINAL and not (isinstance(order, int) and 1 <= order <= 15):
                raise ValueError(f"order {order!r} not in 1..15 or 'original'")
        return value

    def search_config(self) -> SearchConfig:
        return SearchConfig(
            l0=self.l0,
            s0=self.s0,
            eps=self.eps,
            horizon=self.horizon,
            spread=self.spread,
            dt=self.dt,
            spread_mode=self.spread_mode,
            divergence_limit=self.divergence_limit,
            l_max=self.l_max,
            max_simulations=self.max_simulations,
        )
