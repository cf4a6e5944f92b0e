"""
TTE Stability - 摆动方程截断泰勒展开（TTE）近似的稳定性分析库

研究用截断泰勒展开多项式系统代替电力系统经典摆动方程时，
不稳定平衡点、稳定边界与临界切除时间的近似程度。

基本用法:
    >>> from tte_stability import TteStudy
    >>> study = TteStudy()
    >>> # 单机无穷大系统：2阶近似的不稳定平衡点
    >>> study.smib.uep_closed_form(0.5236, 2).value
    3.98...
    >>> # IEEE 9节点系统：1号事故原系统的CCT
    >>> case = study.mm.network.load_case()
    >>> cont = study.mm.network.build_contingency(case, 4, (4, 6), contingency_id=1)
    >>> study.mm.cct.find_cct(cont, "original").cct
    0.32...
"""
from typing import Optional, Sequence

from .context import StudyContext
from .smib import SmibAPI, smib_network
from .series import eval_series, pair_coefficients
from .multimachine.network import NetworkAPI
from .multimachine.simulator import SimulatorAPI
from .multimachine.boundary import BoundaryAPI
from .multimachine.cct import CctAPI
from .models import ORIGINAL, RunConfig
from .exceptions import (
    TteStabilityError,
    ValidationError,
    SeriesInputError,
    CaseFormatError,
    ContingencyError,
    ConfigError,
    NumericalError,
    PowerFlowError,
    SingularReductionError,
    ConvergenceError,
    InconsistentDispatchError,
    NotAnEquilibriumError,
    SearchLimitError,
)

__version__ = "0.1.0"
__all__ = [
    "TteStudy",
    "StudyContext",
    "RunConfig",
    "ORIGINAL",
    "pair_coefficients",
    "eval_series",
    "smib_network",
    "TteStabilityError",
    "ValidationError",
    "SeriesInputError",
    "CaseFormatError",
    "ContingencyError",
    "ConfigError",
    "NumericalError",
    "PowerFlowError",
    "SingularReductionError",
    "ConvergenceError",
    "InconsistentDispatchError",
    "NotAnEquilibriumError",
    "SearchLimitError",
]


class TteStudy:
    """
    TTE稳定性研究主入口类。

    组合所有API模块，共享同一个运行上下文。

    Attributes:
        smib: 单机无穷大系统分析API
        mm: 多机系统API
            - network: 网络模型
            - sim: 时域仿真
            - boundary: 稳定边界搜索
            - cct: 临界切除时间

    Example:
        >>> study = TteStudy(RunConfig(threads=4))
        >>> report = study.smib.check_ordering(step=0.01)
        >>> report.ok
        True
    """

    def __init__(self, config: Optional[RunConfig] = None):
        """
        初始化研究对象。

        Args:
            config: 运行配置，默认使用全部缺省值
        """
        self._ctx = StudyContext(config)

        self.smib = SmibAPI(self._ctx)

        # 多机API - 使用命名空间对象
        class MultiMachineNamespace:
            """多机系统API命名空间。"""
            def __init__(self, ctx: StudyContext):
                self.network = NetworkAPI(ctx)
                self.sim = SimulatorAPI(ctx)
                self.boundary = BoundaryAPI(ctx)
                self.cct = CctAPI(ctx)

        self.mm = MultiMachineNamespace(self._ctx)

    def set_config(self, config: RunConfig) -> None:
        """
        替换运行配置，所有API立即生效。

        Args:
            config: 新的运行配置
        """
        self._ctx.set_config(config)

    @property
    def config(self) -> RunConfig:
        """
        获取当前运行配置。
        """
        return self._ctx.config


def main(argv: Optional[Sequence[str]] = None) -> int:
    from .cli import run

    return run(argv)
