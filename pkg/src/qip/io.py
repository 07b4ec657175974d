"""Model files, fit reports and measurement CSV parsing."""
from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import SchemaError
from .inclusion import SSDD, DataPoint, Inclusion
from .noise import NoiseSummary, summarize

FORMAT_VERSION = 1


# -- JSON with fixed float formatting ---------------------------------------------

def _fmt_float(v: float) -> str:
    if not math.isfinite(v):
        return "null"
    s = f"{v:.17g}"
    if re.fullmatch(r"-?\d+", s):
        s += ".0"
    return s


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float written at 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}"{k}": {dumps(v, indent, _level + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj) + "\n")


# -- model files ---------------------------------------------------------------

def model_to_dict(m: Inclusion, ssdd: Optional[SSDD] = None) -> dict:
    d = {
        "format_version": FORMAT_VERSION,
        "n_y": m.n_y,
        "n_x": m.n_x,
        "A": m.A,
        "B": m.B,
        "C": m.C,
    }
    if not m.strict:
        d["c_invertible"] = m.c_invertible
    if ssdd is not None:
        d.update(X_B=ssdd.X_B, X_A=ssdd.X_A, X_AA=ssdd.X_AA, X_C=ssdd.X_C)
    return d


def _matrix(d: dict, key: str, shape) -> np.ndarray:
    try:
        a = np.array(d[key], dtype=float)
    except KeyError:
        raise SchemaError(f"model file lacks '{key}'") from None
    except (TypeError, ValueError):
        raise SchemaError(f"'{key}' is not a numeric matrix") from None
    if a.shape != shape:
        raise SchemaError(f"'{key}' has shape {a.shape}, expected {shape}")
    return a


def model_from_dict(d: dict, strict: bool = True):
    """Return ``(Inclusion, SSDD or None)`` from a parsed model file."""
    try:
        n_y, n_x = int(d["n_y"]), int(d["n_x"])
    except (KeyError, TypeError, ValueError):
        raise SchemaError("model file needs integer 'n_y' and 'n_x'") from None
    A = _matrix(d, "A", (n_y, n_x))
    B = _matrix(d, "B", (n_y, n_y))
    C = _matrix(d, "C", (n_x, n_x))
    strict = strict and d.get("c_invertible", True)
    m = Inclusion(A, B, C, strict=strict)
    ssdd = None
    if "X_B" in d:
        ssdd = SSDD(
            _matrix(d, "X_B", (n_y, n_y)),
            _matrix(d, "X_A", (n_y, n_x)),
            _matrix(d, "X_AA", (n_x, n_x)),
            _matrix(d, "X_C", (n_x, n_x)),
        )
    return m, ssdd


def save_model(path, m: Inclusion, ssdd: Optional[SSDD] = None) -> None:
    write_json(path, model_to_dict(m, ssdd))


def load_model(path, strict: bool = True):
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as e:
            raise SchemaError(f"invalid JSON: {e.msg}", line=e.lineno) from None
    return model_from_dict(d, strict=strict)


# -- fit reports ----------------------------------------------------------------

@dataclass
class FitReport:
    status: str
    width: float
    objective: float
    active_set: List
    iterations: int
    slacks: List[float]
    alpha: float = 0.0
    model_path: Optional[str] = None
    kkt: Dict[str, float] = field(default_factory=dict)
    result: object = field(default=None, repr=False, compare=False)

    @classmethod
    def from_result(cls, res, point_ids: Sequence, alpha: float = 0.0) -> "FitReport":
        return cls(
            status=res.status.value,
            width=res.width,
            objective=res.objective,
            active_set=[point_ids[i] for i in res.active_set],
            iterations=res.iterations,
            slacks=[float(v) for v in res.slacks],
            alpha=alpha,
            kkt=dict(vars(res.kkt)),
            result=res,
        )

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "status": self.status,
            "width": self.width if self.status == "Optimal" else None,
            "objective": self.objective,
            "alpha": self.alpha,
            "active_set": list(self.active_set),
            "iterations": self.iterations,
            "slacks": self.slacks,
            "kkt": self.kkt,
            "model": self.model_path,
        }


# -- measurement CSV ---------------------------------------------------------------

_COL = re.compile(r"^([yx])(\d+)_(re|im)$")


@dataclass
class Measurements:
    """Grouped rows of a measurement file."""

    point_ids: List[str]
    samples: List[List[DataPoint]]

    @property
    def n_y(self) -> int:
        return self.samples[0][0].y.size

    @property
    def n_x(self) -> int:
        return self.samples[0][0].x.size

    def averaged(self) -> List[DataPoint]:
        return [
            DataPoint(np.mean([p.y for p in g], axis=0), np.mean([p.x for p in g], axis=0))
            for g in self.samples
        ]

    def summaries(self) -> List[NoiseSummary]:
        out = []
        for g in self.samples:
            if len(g) >= 2:
                out.append(summarize([p.y for p in g]))
            else:
                out.append(NoiseSummary.exact(g[0].y))
        return out


def _layout(header: List[str]):
    cols = [h.strip() for h in header]
    has_id = bool(cols) and cols[0] == "point_id"
    value_cols = cols[1:] if has_id else cols
    if len(value_cols) % 2:
        raise SchemaError(
            f"odd number of value columns ({len(value_cols)}); "
            "complex values need paired _re/_im columns", line=1)
    idx = {"y": {}, "x": {}}
    for j, name in enumerate(value_cols):
        m = _COL.match(name)
        if not m:
            raise SchemaError(f"unrecognized column '{name}'", line=1)
        kind, k, part = m.group(1), int(m.group(2)), m.group(3)
        idx[kind].setdefault(k, {})[part] = j + (1 if has_id else 0)
    for kind in "yx":
        keys = sorted(idx[kind])
        if not keys:
            raise SchemaError(f"no {kind} columns", line=1)
        if keys != list(range(len(keys))):
            raise SchemaError(f"{kind} components must be numbered from 0", line=1)
        for k in keys:
            if set(idx[kind][k]) != {"re", "im"}:
                raise SchemaError(f"{kind}{k} lacks a re/im pair", line=1)
    order = {kind: [(idx[kind][k]["re"], idx[kind][k]["im"]) for k in sorted(idx[kind])]
             for kind in "yx"}
    return has_id, len(cols), order


def read_measurements(path) -> Measurements:
    """Read ``point_id, y0_re, y0_im, ..., x0_re, x0_im, ...`` rows.

    The ``point_id`` column is optional; without it each row is its own point.
    Rows sharing an id are repeated measurements of one point.
    """
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("empty file", line=1)
    has_id, ncol, order = _layout(rows[0])
    groups: Dict[str, List[DataPoint]] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != ncol:
            raise SchemaError(f"expected {ncol} fields, got {len(row)}", line=lineno)
        try:
            vals = {kind: np.array([complex(float(row[r]), float(row[i])) for r, i in order[kind]])
                    for kind in "yx"}
        except ValueError:
            raise SchemaError("non-numeric value", line=lineno) from None
        pid = row[0].strip() if has_id else str(lineno - 2)
        groups.setdefault(pid, []).append(DataPoint(vals["y"], vals["x"]))
    if not groups:
        raise SchemaError("no data rows", line=2)
    return Measurements(list(groups), list(groups.values()))


def write_measurements(path, points: Sequence[DataPoint], point_ids=None) -> None:
    n_y, n_x = points[0].y.size, points[0].x.size
    header = ["point_id"]
    header += [f"y{k}_{p}" for k in range(n_y) for p in ("re", "im")]
    header += [f"x{k}_{p}" for k in range(n_x) for p in ("re", "im")]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i, p in enumerate(points):
            pid = i if point_ids is None else point_ids[i]
            vals = []
            for v in list(p.y) + list(p.x):
                vals += [_fmt_float(v.real), _fmt_float(v.imag)]
            w.writerow([pid] + vals)
