"""CSV and JSON emission."""

from __future__ import annotations

import json
import math
import os
from typing import Sequence

import numpy as np

from .errors import FracppError
from .problem import SolutionField


class OutputError(FracppError):
    exit_code = 4


def _fmt(v) -> str:
    return "%.17g" % v


def write_csv(path: str, header: Sequence[str], columns: Sequence) -> None:
    """Write equal-length columns with a header row, floats at 17 digits."""
    cols = [np.asarray(c, dtype=float).ravel() for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns must have equal length")
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(",".join(header) + "\n")
            for row in zip(*cols):
                fh.write(",".join(_fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc


def read_csv(path: str) -> dict[str, np.ndarray]:
    """Read a headed numeric CSV into a column dict."""
    try:
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
    except OSError as exc:
        raise OutputError(f"cannot read {path}: {exc}") from exc
    except ValueError as exc:
        raise OutputError(f"{path}: malformed numeric CSV ({exc})") from exc
    if data.shape[1] != len(header):
        raise OutputError(f"{path}: header has {len(header)} columns, rows have {data.shape[1]}")
    return {name.strip(): data[:, i] for i, name in enumerate(header)}


def write_field_csv(path: str, field: SolutionField) -> None:
    """One row per grid point: ``x, t, u``."""
    X, Tm = np.meshgrid(field.space.nodes, field.time.nodes, indexing="ij")
    write_csv(path, ("x", "t", "u"), (X, Tm, field.values))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(path: str, report: dict) -> None:
    """Deterministic JSON (sorted keys, non-finite floats as strings)."""
    try:
        parent = os.path.dirname(os.path.abspath(path))
        os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
