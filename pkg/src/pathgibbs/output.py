"""Deterministic artifact serialization.

JSON and CSV emitters that render every float with 17 significant digits
(round-trip exact for IEEE doubles) and keep key order stable, so a rerun
with the same config and seed produces byte-identical files. Wall-clock
provenance goes to a separate meta.json and never into result files.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np


def fmt_float(x) -> str:
    """17-significant-digit decimal form; canonical for nan/inf."""
    x = float(x)
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def _canon(obj):
    if isinstance(obj, dict):
        return {str(k): _canon(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canon(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_canon(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _emit(o, ind) -> str:
    # hand-rolled so floats render through fmt_float; json.dumps would fall
    # back to repr inside its C encoder regardless of any float subclass
    pad = " " * ind
    if isinstance(o, dict):
        if not o:
            return "{}"
        rows = [f"{pad}  {json.dumps(k)}: {_emit(v, ind + 2)}" for k, v in o.items()]
        return "{\n" + ",\n".join(rows) + "\n" + pad + "}"
    if isinstance(o, list):
        if not o:
            return "[]"
        rows = [f"{pad}  {_emit(v, ind + 2)}" for v in o]
        return "[\n" + ",\n".join(rows) + "\n" + pad + "]"
    if o is None:
        return "null"
    if o is True:
        return "true"
    if o is False:
        return "false"
    if isinstance(o, float):
        if o != o:
            return "NaN"  # what json.loads round-trips
        if o in (float("inf"), float("-inf")):
            return "Infinity" if o > 0 else "-Infinity"
        return fmt_float(o)
    if isinstance(o, int):
        return str(o)
    return json.dumps(o)


def dumps(obj) -> str:
    """Canonical JSON text: 17-digit floats, preserved key order, LF."""
    return _emit(_canon(obj), 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj))


def write_csv(path, header, columns) -> None:
    """Columns of equal length, floats in 17-digit form."""
    cols = [np.asarray(c) for c in columns]
    n = cols[0].shape[0]
    if any(c.shape != (n,) for c in cols):
        raise ValueError("columns must share one length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(fmt_float(c[i]) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def write_meta(out_dir, argv, config_hash) -> None:
    """Wall-clock and invocation provenance, isolated from result files."""
    meta = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "argv": list(argv),
        "config_hash": config_hash,
    }
    write_json(Path(out_dir) / "meta.json", meta)
