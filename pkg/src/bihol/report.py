"""Deterministic report serialization.

JSON is the record: keys keep insertion order and floats are written with 17
significant digits, so identical runs give byte-identical files.  CSV is a
lossy one-line-per-item summary.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform

import numpy as np

from . import __version__


def versions() -> dict:
    return {"bihol": __version__, "numpy": np.__version__, "python": platform.python_version()}


def build(items, seed: int, tolerance: float, points: int) -> dict:
    return {
        "run": {"seed": int(seed), "tolerance": float(tolerance), "points": int(points),
                "versions": versions()},
        "items": [it.to_dict() for it in items],
    }


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    text = f"{x:.17g}"
    if not any(c in text for c in ".en"):
        text += ".0"
    return text


def _dump(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, (k, v) in enumerate(obj.items()):
            out.append(f"{pad}{json.dumps(str(k))}: ")
            _dump(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
        elif all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in obj):
            out.append("[" + ", ".join(_scalar(v) for v in obj) + "]")
        else:
            out.append("[\n")
            for i, v in enumerate(obj):
                out.append(pad)
                _dump(v, indent, level + 1, out)
                out.append(",\n" if i < len(obj) - 1 else "\n")
            out.append(end + "]")
    else:
        out.append(_scalar(obj))


def _scalar(v) -> str:
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return _float(float(v))


def to_json(report: dict, indent: int = 2) -> str:
    out = []
    _dump(report, indent, 0, out)
    return "".join(out) + "\n"


CSV_FIELDS = ["example", "kind", "id", "chart", "map", "point_index", "residual", "scale",
              "verdict", "expected", "ok"]


def to_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for it in report["items"]:
        row = dict(it)
        row.setdefault("map", "")
        for key in ("residual", "scale"):
            row[key] = f"{row[key]:.6g}"
        w.writerow(row)
    return buf.getvalue()


def summarize(items) -> dict:
    """Per example: item count, mismatches and precondition errors."""
    out = {}
    for it in items:
        s = out.setdefault(it.example, {"items": 0, "mismatch": 0, "error": 0})
        s["items"] += 1
        if it.verdict == "error":
            s["error"] += 1
        elif not it.ok:
            s["mismatch"] += 1
    return out
