"""Deterministic JSON/CSV writers and readers for configs, reports and point data."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["dumps", "write_json", "config_hash", "read_points_csv", "write_labels_csv", "write_rows_csv", "fmt"]


def fmt(x: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    return format(float(x), ".17g")


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in seq]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with insertion-ordered keys and 17-digit floats."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def config_hash(raw) -> str:
    """SHA-256 of the canonical (sorted, compact) JSON form."""
    text = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_points_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Points and optional 1-based labels from a CSV file.

    A first row with no numeric field is a header; a header column named ``label`` (it
    must be last) holds class labels. Without a header every column is a
    coordinate.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    header = None
    numeric = [_is_number(c) for c in rows[0]]
    if any(numeric) and not all(numeric):
        raise ValueError(f"{path}: row 1 mixes numbers and names")
    if not any(numeric):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: header but no data rows")
    width = len(rows[0])
    for i, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"{path}: row {i + 1} has {len(r)} fields, expected {width}")
        if not all(_is_number(c) for c in r):
            raise ValueError(f"{path}: row {i + 1} has a non-numeric field")
    data = np.array([[float(c) for c in r] for r in rows])
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{path}: non-finite value")
    labels = None
    if header is not None:
        if len(header) != width:
            raise ValueError(f"{path}: header has {len(header)} fields, rows have {width}")
        if "label" in header:
            if header.index("label") != width - 1:
                raise ValueError(f"{path}: the label column must be last")
            lab = data[:, -1]
            if np.any(lab != np.round(lab)) or np.any(lab < 1):
                raise ValueError(f"{path}: labels must be positive integers")
            labels = lab.astype(np.int64)
            data = data[:, :-1]
    if data.shape[1] < 1:
        raise ValueError(f"{path}: no coordinate columns")
    return data, labels


def write_labels_csv(path, labels) -> None:
    Path(path).write_text("".join(f"{int(v)}\n" for v in labels), encoding="utf-8")


def write_rows_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for r in rows:
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in r))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
