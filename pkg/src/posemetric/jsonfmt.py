"""Canonical JSON writer: floats at 9 significant digits.

Nine digits pin every float32 value exactly, so a write/read/write cycle is
byte-identical after the first pass; dict keys keep construction order, so
writers define a stable layout. Used for dataset files and wire responses.
"""
from __future__ import annotations

import json
import math

import numpy as np


class JsonFormatError(ValueError):
    pass


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise JsonFormatError(f"cannot serialize non-finite float {x!r}")
    if x == int(x) and abs(x) < 1e15:
        return f"{int(x)}.0"
    return format(x, ".9g")


def dumps(obj) -> str:
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def dump_bytes(obj) -> bytes:
    return dumps(obj).encode("utf-8")


def _write(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif isinstance(obj, bool):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(format_float(obj))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _write(obj.tolist(), parts)
    elif isinstance(obj, dict):
        parts.append("{")
        for i, (key, value) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise JsonFormatError(f"object keys must be strings, got {type(key)}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key))
            parts.append(":")
            _write(value, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, value in enumerate(obj):
            if i:
                parts.append(",")
            _write(value, parts)
        parts.append("]")
    else:
        raise JsonFormatError(f"cannot serialize {type(obj)}")
