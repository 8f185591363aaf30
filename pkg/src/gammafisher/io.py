"""Deterministic JSON/CSV writers and binary grid dumps.

Floats are written with 17 significant digits (round-trip exact) and
non-finite values as the strings ``"+inf"``, ``"-inf"`` and ``"nan"``, so two
runs with the same inputs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

import numpy as np


def fmt_float(v: float) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "+inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        s = fmt_float(obj)
        return s if math.isfinite(obj) else json.dumps(s)
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "__float__") and not isinstance(obj, np.ndarray):
        return _encode(float(obj), indent, level)  # PLUS_INF and friends
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not seq:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in seq):
            return "[" + ", ".join(_encode(v, indent, level) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in seq) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    return _encode(obj, indent, 0) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else fmt_float(v) if isinstance(v, (float, np.floating))
                    else v for v in row])
    return buf.getvalue()


class OutputDir:
    """Collects written files and their SHA-256 for the manifest."""

    def __init__(self, root):
        self.root = Path(root)
        self.files = {}

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def write_bytes(self, name: str, data: bytes) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        self.files[name] = (hashlib.sha256(data).hexdigest(), len(data))
        return path

    def write_json(self, name: str, obj) -> Path:
        return self.write_text(name, dumps(obj))

    def write_manifest(self, name: str = "manifest.json") -> Path:
        entries = [{"path": k, "sha256": h, "bytes": n} for k, (h, n) in sorted(self.files.items())]
        data = dumps({"files": entries}).encode("utf-8")
        path = self.root / name
        path.write_bytes(data)
        return path


def grid_dump(grid, values, **meta) -> bytes:
    """One JSON header line (grid, dtype, extra metadata) followed by raw float64 values."""
    arr = np.ascontiguousarray(values, dtype="<f8").reshape(-1)
    if arr.size != grid.size:
        raise ValueError("value count does not match the grid")
    header = {"grid": grid.describe(), "dtype": "<f8", "count": int(arr.size)}
    header.update(meta)
    return json.dumps(header, sort_keys=True).encode("utf-8") + b"\n" + arr.tobytes()


def read_grid_dump(data: bytes):
    head, _, body = data.partition(b"\n")
    header = json.loads(head)
    return header, np.frombuffer(body, dtype=header["dtype"])
