"""截断泰勒展开（TTE）核心。

单机与多机模型共用的正弦/余弦耦合项 C·sin(θ0 + x) + D·cos(θ0 + x) 的截断展开。
k阶系数为 [C·sin(θ0 + kπ/2) + D·cos(θ0 + kπ/2)]/k!，按k mod 4循环取值以避免π/2的舍入误差。
所有函数无副作用。
"""
import math
from typing import Union

import numpy as np

from .exceptions import SeriesInputError
from .models import TruncSeries

ArrayLike = Union[float, np.ndarray]


def _check_order(n: int) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise SeriesInputError(f"truncation order must be a positive integer, got {n!r}")


def _shifted(theta0: ArrayLike, k: int):
    # sin/cos(θ0 + kπ/2)
    s, c = np.sin(theta0), np.cos(theta0)
    return ((s, c), (c, -s), (-s, -c), (-c, s))[k % 4]


def pair_coefficient_array(C: ArrayLike, D: ArrayLike, theta0: ArrayLike, n: int) -> np.ndarray:
    """批量计算耦合对的展开系数。

    Args:
        C: 正弦耦合系数（标量或数组）
        D: 余弦耦合系数（与C可广播）
        theta0: 展开角（rad，与C可广播）
        n: 截断阶数

    Returns:
        np.ndarray: 形状(n+1, *broadcast_shape)，第k层为e_k

    Raises:
        SeriesInputError: 阶数非法或输入含非有限值
    """
    _check_order(n)
    C, D, theta0 = np.broadcast_arrays(
        np.asarray(C, dtype=float), np.asarray(D, dtype=float), np.asarray(theta0, dtype=float)
    )
    if not (np.isfinite(C).all() and np.isfinite(D).all() and np.isfinite(theta0).all()):
        raise SeriesInputError("expansion inputs must be finite", details={"C": C, "D": D, "theta0": theta0})
    out = np.empty((n + 1,) + C.shape)
    for k in range(n + 1):
        s, c = _shifted(theta0, k)
        out[k] = (C * s + D * c) / math.factorial(k)
    return out


def pair_coefficients(C: float, D: float, theta0: float, n: int) -> TruncSeries:
    """计算单个耦合对的n阶截断展开。

    Args:
        C: 正弦耦合系数（pu）
        D: 余弦耦合系数（pu）
        theta0: 展开角（rad）
        n: 截断阶数，n ≥ 1

    Returns:
        TruncSeries: e_0..e_n，e_0为平衡点处的常数项

    Raises:
        SeriesInputError: 阶数非法或输入含非有限值

    Example:
        >>> pair_coefficients(1.0, 0.0, 0.0, 3).coeffs
        (0.0, 1.0, -0.0, -0.16666666666666666)
    """
    coeffs = pair_coefficient_array(C, D, theta0, n)
    return TruncSeries(theta0=float(theta0), order=n, coeffs=tuple(float(v) for v in coeffs))


def horner(coeffs: np.ndarray, x: ArrayLike) -> np.ndarray:
    """按最高阶优先的Horner递推求Σ e_k x^k，coeffs首维为k，其余维与x广播。"""
    acc = coeffs[-1] * np.ones_like(x, dtype=float)
    for k in range(coeffs.shape[0] - 2, -1, -1):
        acc = acc * x + coeffs[k]
    return acc


def eval_series(s: TruncSeries, x: ArrayLike) -> ArrayLike:
    """在位移x处计算截断级数的值。

    Args:
        s: 截断级数
        x: 相对展开角的位移（rad），标量或数组

    Returns:
        Σ_{k=0..n} e_k x^k

    Raises:
        SeriesInputError: x含非有限值

    Example:
        >>> sin3 = pair_coefficients(1.0, 0.0, 0.0, 3)
        >>> round(eval_series(sin3, 0.5), 6)
        0.479167
    """
    x_arr = np.asarray(x, dtype=float)
    if not np.isfinite(x_arr).all():
        raise SeriesInputError("series argument must be finite")
    value = horner(np.asarray(s.coeffs), x_arr)
    return float(value) if value.ndim == 0 else value


def series_derivative(s: TruncSeries) -> TruncSeries:
    """逐项求导，得到n−1阶级数（n = 1时得到常数零级数的1阶表示）。"""
    coeffs = [k * s.coeffs[k] for k in range(1, s.order + 1)]
    if len(coeffs) == 1:
        coeffs.append(0.0)
    return TruncSeries(theta0=s.theta0, order=len(coeffs) - 1, coeffs=tuple(coeffs))


def exact_value(C: float, D: float, theta0: float, x: ArrayLike) -> ArrayLike:
    """被展开函数的精确值 C·sin(θ0 + x) + D·cos(θ0 + x)。"""
    return C * np.sin(theta0 + np.asarray(x)) + D * np.cos(theta0 + np.asarray(x))
