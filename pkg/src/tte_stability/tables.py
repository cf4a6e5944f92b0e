"""结果文件读写。

CSV使用pandas，单行表头、列顺序固定、无索引列；JSON缩进2格。
浮点数按round-trip精度读回，写出再读入得到完全相同的数值。
"""
import json
import math
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd

PathLike = Union[str, Path]


def _prepare(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_table(frame: pd.DataFrame, path: PathLike) -> Path:
    """写出CSV，无穷大写作inf。"""
    path = _prepare(path)
    frame.to_csv(path, index=False)
    return path


def read_table(path: PathLike) -> pd.DataFrame:
    return pd.read_csv(path, float_precision="round_trip")


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return None if math.isnan(value) else value
    return value


def write_json(obj: Any, path: PathLike) -> Path:
    """写出JSON，numpy标量与数组转为原生类型，inf写作字符串"inf"，NaN写作null。"""
    path = _prepare(path)
    path.write_text(json.dumps(_plain(obj), indent=2), encoding="utf-8")
    return path


def read_json(path: PathLike) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
