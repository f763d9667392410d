# daf_numerics/utils/artifact_io.py

import json
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd

from .. import config

LEAF_ARC_COLUMNS = ["index", "t", "x", "y", "theta", "tx", "ty", "ttheta"]


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays and dataclasses into JSON-native values."""
    if hasattr(value, "to_dict"):
        return to_jsonable(value.to_dict())
    if is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(asdict(value))
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def dumps_sorted(payload: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False)


def write_json(path: Union[str, Path], payload: Dict[str, Any]) -> Path:
    """UTF-8 JSON with lexicographically sorted keys."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_sorted(payload) + "\n", encoding="utf-8")
    return path


def leaf_arc_frame(params: np.ndarray, points: np.ndarray, tangents: np.ndarray) -> pd.DataFrame:
    """Tabulate a sampled arc with the LeafArc CSV columns."""
    data = np.column_stack([np.asarray(params, dtype=float), points, tangents])
    frame = pd.DataFrame(data, columns=LEAF_ARC_COLUMNS[1:])
    frame.insert(0, "index", np.arange(len(frame), dtype=int))
    return frame


def write_csv(path: Union[str, Path], frame: pd.DataFrame) -> Path:
    """Comma-delimited, '.' decimal, LF line endings, header row, 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path,
        index=False,
        sep=",",
        decimal=".",
        lineterminator="\n",
        float_format=config.CSV_FLOAT_FORMAT,
        encoding="utf-8",
    )
    return path
