"""Diff-stable CSV and JSON writers plus model and data file helpers."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .ppca import PpcaModel

FLOAT_FORMAT = "%.17g"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def write_csv(path, columns, rows) -> Path:
    """One header row, then ``rows`` (sequences in column order)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        # JSON has no infinities; keep them readable instead of invalid
        return f if math.isfinite(f) else str(f)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_json_safe(obj), indent=2, sort_keys=True) + "\n")
    return path


def write_data_csv(path, data) -> Path:
    """Data matrix, one sample per row, no header."""
    path = Path(path)
    np.savetxt(path, np.atleast_2d(data), delimiter=",", fmt=FLOAT_FORMAT)
    return path


def read_data_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def save_model(path, model: PpcaModel) -> Path:
    path = Path(path)
    path.write_text(model.to_json() + "\n")
    return path


def load_model(path, allow_degenerate: bool = False) -> PpcaModel:
    return PpcaModel.from_json(Path(path).read_text(), allow_degenerate)
