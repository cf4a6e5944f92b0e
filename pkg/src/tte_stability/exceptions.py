"""自定义异常类模块。

定义了tte_stability库中使用的所有自定义异常。
异常分为两族：输入校验失败（CLI退出码1）与数值计算失败（CLI退出码2）。
"""
from typing import Any, Optional


class TteStabilityError(Exception):
    """tte_stability基础异常类。

    所有tte_stability相关异常的基类。

    Attributes:
        message: 错误消息
        details: 附加诊断信息（可选），例如出错位置、最后一次括区间等
        exit_code: 命令行退出码
    """

    exit_code = 2

    def __init__(self, message: str, details: Optional[Any] = None):
        """初始化异常。

        Args:
            message: 错误消息
            details: 附加诊断信息
        """
        self.message = message
        self.details = details
        super().__init__(self.message)


# ==================== 输入校验 ====================

class ValidationError(TteStabilityError):
    """参数验证失败异常。

    当调用参数或配置不满足前置条件时抛出。
    """

    exit_code = 1


class SeriesInputError(ValidationError):
    """截断级数输入异常。

    当展开参数非有限值或阶数非法时抛出。
    """
    pass


class CaseFormatError(ValidationError):
    """算例文件格式异常。

    当算例文件无法解析，或网络不连通、机组挂在不存在的母线上时抛出。
    details中带有出错位置。
    """
    pass


class ContingencyError(ValidationError):
    """预想事故定义异常。

    当故障母线不在被切除线路的端点上，或线路不存在时抛出。
    """
    pass


class ConfigError(ValidationError):
    """运行配置异常。"""
    pass


# ==================== 数值计算 ====================

class NumericalError(TteStabilityError):
    """数值计算失败异常。

    所有不收敛、奇异、发散类错误的基类。
    """
    pass


class PowerFlowError(NumericalError):
    """潮流计算发散异常。"""
    pass


class SingularReductionError(NumericalError):
    """Kron消去奇异异常。

    当被消去节点块数值上秩亏时抛出，details为被消去的节点集合。
    """
    pass


class ConvergenceError(NumericalError):
    """牛顿迭代不收敛异常。"""
    pass


class InconsistentDispatchError(NumericalError):
    """出力不一致异常。

    当给定的机械功率无法被网络吸收（不存在平衡点）时抛出。
    """
    pass


class NotAnEquilibriumError(NumericalError):
    """展开点不是平衡点异常。

    TTE系统只能在平衡点处展开，否则右端项在展开点不为零。
    """
    pass


class SearchLimitError(NumericalError):
    """稳定边界搜索超限异常。

    在l_max或仿真次数上限内未检测到失稳时抛出，
    details为最后的括区间(l, s)。
    """
    pass
