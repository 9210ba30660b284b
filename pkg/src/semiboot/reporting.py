"""Canonical JSON output, run manifests and flat CSV dumps.

Reports are written with sorted keys and every float rendered with 17
significant digits, so two runs that compute the same numbers produce the
same bytes.  Wall-clock fields live only under ``manifest.timestamps``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__

__all__ = [
    "VOLATILE_KEY",
    "dumps",
    "finish_manifest",
    "make_manifest",
    "sha256_file",
    "strip_volatile",
    "write_records_csv",
]

VOLATILE_KEY = "timestamps"


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    # keep floats recognisable as floats after a round trip
    if all(ch not in s for ch in ".en"):
        s += ".0"
    return s


def _plain(obj):
    """Convert numpy containers and scalars to builtins."""
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _encode(obj, indent: int, level: int, out: list) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_format_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, key in enumerate(sorted(obj)):
            if i:
                out.append(",\n")
            out.append(pad)
            _encode(str(key), indent, level + 1, out)
            out.append(": ")
            _encode(obj[key], indent, level + 1, out)
        out.append("\n" + end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
        elif all(isinstance(v, (int, float)) and not isinstance(v, bool) or v is None for v in obj):
            # numeric vectors stay on one line
            parts: list = []
            for v in obj:
                _encode(v, indent, level + 1, parts)
                parts.append(", ")
            out.append("[" + "".join(parts[:-1]) + "]")
        else:
            out.append("[\n")
            for i, v in enumerate(obj):
                if i:
                    out.append(",\n")
                out.append(pad)
                _encode(v, indent, level + 1, out)
            out.append("\n" + end + "]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__} as JSON")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text: sorted keys, 17-digit floats, non-finite floats as ``null``."""
    out: list = []
    _encode(_plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="milliseconds")


def make_manifest(command: str, config: dict, master_seed: int, input_path=None, input_sha256=None) -> dict:
    return {
        "command": command,
        "config": config,
        "master_seed": int(master_seed),
        "version": __version__,
        "input": {"path": None if input_path is None else str(input_path), "sha256": input_sha256},
        VOLATILE_KEY: {"started": _now()},
    }


def finish_manifest(manifest: dict, elapsed: float) -> None:
    manifest[VOLATILE_KEY]["finished"] = _now()
    manifest[VOLATILE_KEY]["elapsed_seconds"] = float(elapsed)


def strip_volatile(report: dict) -> dict:
    """Copy of ``report`` without wall-clock fields, for reproducibility checks."""
    out = dict(report)
    if isinstance(out.get("manifest"), dict):
        out["manifest"] = {k: v for k, v in out["manifest"].items() if k != VOLATILE_KEY}
    return out


def _flatten(rec, prefix="", out=None) -> dict:
    out = {} if out is None else out
    if isinstance(rec, dict):
        for k, v in rec.items():
            _flatten(v, f"{prefix}{k}.", out)
        return out
    if isinstance(rec, list):
        if len(rec) == 1 and not isinstance(rec[0], (dict, list)):
            out[prefix[:-1]] = rec[0]
        else:
            for i, v in enumerate(rec):
                _flatten(v, f"{prefix}{i}.", out)
        return out
    out[prefix[:-1]] = rec
    return out


def _csv_cell(v):
    if isinstance(v, float):
        return format(v, ".17g") if math.isfinite(v) else ""
    return "" if v is None else v


def write_records_csv(records, path) -> int:
    """One row per record, nested fields flattened to dotted column names."""
    rows = [_flatten(_plain(r)) for r in records]
    cols: list = []
    for row in rows:
        for k in row:
            if k not in cols:
                cols.append(k)
    with Path(path).open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _csv_cell(v) for k, v in row.items()})
    return len(rows)
