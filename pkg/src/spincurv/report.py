"""Deterministic JSON/CSV/binary output with atomic writes."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "SCHEMA_VERSION",
    "dumps",
    "atomic_write",
    "write_json",
    "write_csv",
    "convergence_table",
    "export_field",
]

SCHEMA_VERSION = "1.0"


def _plain(obj):
    """Convert numpy and dataclass values to plain Python containers."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return _plain(obj.to_dict() if hasattr(obj, "to_dict") else asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.complexfloating, complex)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    return obj


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


def _encode(obj, indent: int, level: int, out: list):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        keys = sorted(obj)
        for i, k in enumerate(keys):
            out.append(pad + json.dumps(k) + ": ")
            _encode(obj[k], indent, level + 1, out)
            out.append(",\n" if i < len(keys) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, bool)) or v is None for v in obj):
            parts = []
            for v in obj:
                sub = []
                _encode(v, indent, level + 1, sub)
                parts.append("".join(sub))
            out.append("[" + ", ".join(parts) + "]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _encode(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def _prune(obj):
    """Drop empty optional sections (None, NaN, infinite, empty dict or list
    values). Inside lists non-finite entries stay, as ``null``, to keep positions."""
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            v = _prune(v)
            if v is None or (isinstance(v, float) and not math.isfinite(v)):
                continue
            if isinstance(v, (dict, list)) and len(v) == 0:
                continue
            out[k] = v
        return out
    if isinstance(obj, list):
        return [_prune(v) for v in obj]
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON with sorted keys and floats printed to 17 significant digits.

    Missing values (None, non-finite floats, empty containers) are omitted from
    objects; non-finite list entries become ``null``.
    """
    out: list = []
    _encode(_prune(_plain(obj)), indent, 0, out)
    return "".join(out) + "\n"


def atomic_write(path, data: bytes | str) -> Path:
    """Write to a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
            fh.write(data)
        # mkstemp creates 0600 files; give the result the usual umask mode
        umask = os.umask(0)
        os.umask(umask)
        os.chmod(tmp, 0o666 & ~umask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path, report: dict) -> Path:
    body = dict(report)
    body.setdefault("schema_version", SCHEMA_VERSION)
    return atomic_write(path, dumps(body))


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(v), ".17g") if isinstance(v, (float, np.floating)) else v for v in row])
    return atomic_write(path, buf.getvalue())


def convergence_table(hs, values) -> list:
    """Rows ``(h, value, ratio, fitted order)`` for a refinement study.

    ``ratio`` is the previous value over this one and the order is
    ``log(ratio) / log(h_prev / h)``; both are NaN on the first row.
    """
    hs = [float(h) for h in hs]
    values = [float(v) for v in values]
    rows = []
    for i, (h, v) in enumerate(zip(hs, values)):
        if i == 0 or v == 0:
            rows.append((h, v, float("nan"), float("nan")))
            continue
        ratio = values[i - 1] / v
        order = math.log(abs(ratio)) / math.log(hs[i - 1] / h) if ratio != 0 else float("nan")
        rows.append((h, v, ratio, order))
    return rows


def export_field(path, array: np.ndarray, meta: dict) -> tuple[Path, Path]:
    """Raw ``.npy`` field plus a JSON sidecar with shape, dtype and metadata."""
    path = Path(path)
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(array), allow_pickle=False)
    p = atomic_write(path, buf.getvalue())
    side = dict(meta)
    side.update(shape=list(array.shape), dtype=str(array.dtype), file=path.name, schema_version=SCHEMA_VERSION)
    s = atomic_write(path.with_suffix(".json"), dumps(side))
    return p, s
