"""Space files in, deterministic JSON and CSV reports out.

Space file layout::

    {"points": [...],
     "metric": {"type": "matrix", "data": [[...], ...]}
               | {"type": "graph", "data": [[u, v, w], ...]},
     "kernel": [[...], ...],          # optional, rows in point order
     "measure": [...]}                # optional
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import math
from pathlib import Path

import numpy as np

from .errors import BadConfig, InvalidMeasure
from .metric_core import DiscreteMeasure, FiniteMetricSpace, RandomWalkKernel, graph_metric, validate_space

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-9
ROW_RENORMALIZE_TOL = 1e-6


@dataclasses.dataclass
class SpaceFile:
    space: FiniteMetricSpace
    kernel: RandomWalkKernel | None
    measure: DiscreteMeasure | None


def read_json(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise BadConfig(f"{path} is not valid JSON: {exc}") from None


def _kernel_rows(raw, n: int) -> np.ndarray:
    k = np.asarray(raw, dtype=float)
    if k.shape != (n, n):
        raise BadConfig(f"kernel must be {n}x{n}, got shape {k.shape}")
    if (k < 0).any():
        i, j = np.argwhere(k < 0)[0]
        raise InvalidMeasure(f"kernel entry ({i}, {j}) is negative")
    err = np.abs(k.sum(axis=1) - 1.0)
    bad = np.flatnonzero(err > ROW_RENORMALIZE_TOL)
    if bad.size:
        raise InvalidMeasure(f"kernel row {int(bad[0])} sums to {k[bad[0]].sum():.12g}")
    drift = np.flatnonzero(err > ROW_SUM_TOL)
    if drift.size:
        log.warning("renormalizing kernel rows %s (off by at most %.2e)", drift.tolist(), float(err.max()))
        k = k / k.sum(axis=1, keepdims=True)
    return k


def parse_space(doc: dict) -> SpaceFile:
    try:
        metric = doc["metric"]
        kind, data = metric["type"], metric["data"]
    except (KeyError, TypeError):
        raise BadConfig("space file needs a 'metric' object with 'type' and 'data'") from None
    points = doc.get("points")
    if kind == "matrix":
        space = validate_space(data, labels=None if points is None else [_label(p) for p in points])
    elif kind == "graph":
        space = graph_metric((_label(u), _label(v), w) for u, v, w in data)
        if points is not None:
            labels = [_label(p) for p in points]
            if sorted(map(repr, labels)) != sorted(map(repr, space.labels)):
                raise BadConfig("'points' do not match the graph's vertices")
            order = [space.index(lab) for lab in labels]
            space = FiniteMetricSpace(tuple(labels), space.distances[np.ix_(order, order)])
    else:
        raise BadConfig(f"unknown metric type {kind!r}; expected 'matrix' or 'graph'")
    kernel = None
    if doc.get("kernel") is not None:
        kernel = RandomWalkKernel(space, _kernel_rows(doc["kernel"], space.n), tol=ROW_SUM_TOL)
    measure = None
    if doc.get("measure") is not None:
        w = np.asarray(doc["measure"], dtype=float)
        if w.shape != (space.n,):
            raise BadConfig(f"measure must have {space.n} entries")
        measure = DiscreteMeasure(space, w)
    return SpaceFile(space, kernel, measure)


def _label(p):
    return tuple(p) if isinstance(p, list) else p


def load_space(path: str | Path) -> SpaceFile:
    return parse_space(read_json(path))


def space_document(space: FiniteMetricSpace, kernel: RandomWalkKernel | None = None) -> dict:
    doc = {
        "points": [list(lab) if isinstance(lab, tuple) else lab for lab in space.labels],
        "metric": {"type": "matrix", "data": space.distances.tolist()},
    }
    if kernel is not None:
        doc["kernel"] = kernel.matrix.tolist()
    return doc


def to_plain(obj):
    """Recursively convert numpy values, tuples and report objects to JSON-ready types."""
    if hasattr(obj, "to_dict"):
        return to_plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if dataclasses.is_dataclass(obj):
        return to_plain(dataclasses.asdict(obj))
    return obj


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return "%.17g" % x


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float printed to 17 significant digits; NaN and inf become null."""

    def emit(v, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if v is None or isinstance(v, bool):
            return json.dumps(v)
        if isinstance(v, int):
            return str(v)
        if isinstance(v, float):
            return _format_float(v)
        if isinstance(v, str):
            return json.dumps(v)
        if isinstance(v, dict):
            if not v:
                return "{}"
            items = [f"{pad}{json.dumps(k)}: {emit(x, level + 1)}" for k, x in v.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(v, list):
            if not v:
                return "[]"
            if all(not isinstance(x, (dict, list)) for x in v):
                return "[" + ", ".join(emit(x, level + 1) for x in v) + "]"
            return "[\n" + ",\n".join(pad + emit(x, level + 1) for x in v) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(v).__name__}")

    return emit(to_plain(obj), 0) + "\n"


def csv_text(rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow(["" if v is None else _format_float(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()
