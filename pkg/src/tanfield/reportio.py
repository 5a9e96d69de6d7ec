"""Deterministic report serialization.

Reports are JSON documents with sorted keys and every float written with
17 significant digits, so identical inputs yield byte-identical files and
all values round-trip exactly. Timestamps live in a dedicated metadata
field that comparisons can drop.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np


def _scalar(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v) or math.isinf(v):
            raise ValueError("reports must not contain NaN or infinity")
        return format(v, ".17g")
    if isinstance(x, str):
        return json.dumps(x, ensure_ascii=False)
    if x is None:
        return "null"
    raise TypeError(f"unsupported report value of type {type(x).__name__}")


def emit_json(obj, indent: int = 0) -> str:
    """Render an object tree as deterministic JSON text."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        parts = []
        for key in sorted(obj):
            if not isinstance(key, str):
                raise TypeError("report keys must be strings")
            parts.append(f"{inner}{json.dumps(key)}: {emit_json(obj[key], indent + 1)}")
        return "{\n" + ",\n".join(parts) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        parts = [f"{inner}{emit_json(v, indent + 1)}" for v in seq]
        return "[\n" + ",\n".join(parts) + "\n" + pad + "]"
    return _scalar(obj)


def write_report(path, report: dict) -> str:
    text = emit_json(report) + "\n"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
