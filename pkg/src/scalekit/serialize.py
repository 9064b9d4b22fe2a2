"""Byte-stable JSON / CSV rendering for CLI outputs.

JSON is canonical: keys sorted, floats printed with 17 significant digits,
so identical configs produce identical bytes regardless of thread count.
CSV is a lossy projection: one ``key,value`` row per scalar leaf.
"""

from __future__ import annotations

import json
import math

import numpy as np


def _coerce(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_coerce(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): _coerce(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_coerce(v) for v in obj]
    return obj


def _render(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if math.isnan(obj):
            out.append('"nan"')
        elif math.isinf(obj):
            out.append('"inf"' if obj > 0 else '"-inf"')
        else:
            out.append(format(obj, ".17g"))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(", ")
            out.append(json.dumps(str(key)))
            out.append(": ")
            _render(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, val in enumerate(obj):
            if i:
                out.append(", ")
            _render(val, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj)!r}")


def canonical_json(obj):
    """Render obj as a canonical JSON string (sorted keys, .17g floats)."""
    out = []
    _render(_coerce(obj), out)
    out.append("\n")
    return "".join(out)


def _flatten(obj, prefix, rows):
    if isinstance(obj, dict):
        for key in sorted(obj):
            _flatten(obj[key], f"{prefix}.{key}" if prefix else str(key), rows)
    elif isinstance(obj, (list, tuple)):
        for i, val in enumerate(obj):
            _flatten(val, f"{prefix}[{i}]", rows)
    else:
        out = []
        _render(obj, out)
        rows.append((prefix, "".join(out)))


def to_csv(obj):
    """Flatten scalar leaves into ``key,value`` rows (diagnostics are lost)."""
    rows = []
    _flatten(_coerce(obj), "", rows)
    lines = ["key,value"]
    for key, val in rows:
        lines.append(f"{key},{val}")
    return "\n".join(lines) + "\n"
