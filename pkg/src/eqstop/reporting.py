"""JSON / CSV artifact emission with self-describing file names."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def grid_hash(grid) -> str:
    g = np.ascontiguousarray(np.asarray(grid, dtype=float))
    return hashlib.sha256(g.tobytes()).hexdigest()[:10]


def artifact_stem(experiment: str, params: dict, grid=None) -> str:
    """``<experiment>__k=v_...__g<hash>__v<version>``; parameters sorted by key."""
    parts = []
    for k in sorted(params):
        v = params[k]
        v = f"{v:g}" if isinstance(v, float) else str(v)
        parts.append(f"{k}={v}")
    stem = experiment + "__" + "_".join(parts)
    if grid is not None:
        stem += f"__g{grid_hash(grid)}"
    return (stem + f"__v{__version__}").replace("/", "-").replace(" ", "")


def to_jsonable(obj):
    """Convert numpy values, sets and infinities into JSON-safe structures."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if hasattr(obj, "to_record"):
        return to_jsonable(obj.to_record())
    return obj


def write_json(path, data) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(to_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_table(path, columns, rows) -> Path:
    """CSV with a header; floats written with repr for exact round trips."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return path
