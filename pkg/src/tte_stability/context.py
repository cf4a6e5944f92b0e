"""共享运行上下文。

提供配置持有、数值异常转换与有序并行执行等基础功能，所有API类都通过它工作。
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from typing import Callable, Iterable, Iterator, List, Optional, TypeVar

import numpy as np

from .exceptions import NumericalError, TteStabilityError
from .models import RunConfig

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class StudyContext:
    """运行上下文类。

    持有运行配置，负责把底层numpy/scipy错误转换为本库的异常，
    并按配置的线程数有序地并行执行独立任务。

    Attributes:
        config: 运行配置
    """

    def __init__(self, config: Optional[RunConfig] = None):
        """初始化上下文。

        Args:
            config: 运行配置，默认使用全部缺省值
        """
        self.config = config or RunConfig()

    def set_config(self, config: RunConfig) -> None:
        """替换运行配置。

        Args:
            config: 新的运行配置
        """
        self.config = config

    @contextmanager
    def guard(self, what: str) -> Iterator[None]:
        """把底层数值错误转换为NumericalError。

        Args:
            what: 正在进行的计算，用于错误消息

        Raises:
            NumericalError: 线性代数失败或浮点异常
        """
        try:
            yield
        except TteStabilityError:
            raise
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"{what}: 线性代数计算失败: {e}") from e
        except FloatingPointError as e:
            raise NumericalError(f"{what}: 浮点异常: {e}") from e

    def map_ordered(self, fn: Callable[[T], R], items: Iterable[T]) -> List[R]:
        """并行执行并按输入顺序返回结果。

        线程数由config.threads限定；结果顺序与调度无关。

        Args:
            fn: 对单个元素执行的函数
            items: 输入元素

        Returns:
            List: 与items一一对应的结果
        """
        items = list(items)
        threads = min(self.config.threads, max(len(items), 1))
        if threads <= 1:
            return [fn(item) for item in items]
        logger.debug("fan out %d tasks to %d threads", len(items), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
