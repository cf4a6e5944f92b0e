"""多机系统API模块。

包含网络模型、时域仿真、稳定边界搜索与临界切除时间计算。
"""
from .network import NetworkAPI
from .simulator import SimulatorAPI
from .boundary import BoundaryAPI
from .cct import CctAPI

__all__ = [
    "NetworkAPI",
    "SimulatorAPI",
    "BoundaryAPI",
    "CctAPI",
]
