"""Plain-text artifacts: matrix CSV and JSON, with embedded run metadata.

Every artifact carries ``{tool_version, config, seed}``. JSON files hold it
at the top level next to ``result``; CSV files hold it as a single leading
``# meta: {...}`` comment line, which readers skip.
"""

import json
import math

import numpy as np

from .errors import DimensionMismatch

META_PREFIX = "# meta: "


def fmt(x):
    """Shortest round-trip text for a float; infinities as ``inf``/``-inf``."""
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    if x == 0.0:
        return "0"
    return repr(x)


def jsonable(obj):
    """Recursively convert numpy values and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt(x)
    return obj


def dumps_json(obj):
    return json.dumps(jsonable(obj), indent=2) + "\n"


def meta_line(meta):
    return META_PREFIX + json.dumps(jsonable(meta), sort_keys=True, separators=(",", ":")) + "\n"


def matrix_csv(M, meta=None):
    """Matrix CSV: a ``rows,cols`` line, then one line per row with 17
    significant digits."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    lines = [meta_line(meta)] if meta is not None else []
    lines.append(f"{M.shape[0]},{M.shape[1]}\n")
    lines += [",".join(_g17(v) for v in row) + "\n" for row in M]
    return "".join(lines)


def _g17(x):
    return fmt(x) if not math.isfinite(x) else "%.17g" % (x + 0.0)


def table_csv(header, rows, meta=None):
    lines = [meta_line(meta)] if meta is not None else []
    lines.append(",".join(header) + "\n")
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    return "".join(lines)


def read_matrix(path):
    """Load a matrix CSV written by :func:`matrix_csv`; ``#`` lines are
    skipped and the shape line is checked against the data."""
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                lines.append(line)
    if not lines:
        raise DimensionMismatch(f"{path}: missing 'rows,cols' line")
    try:
        rows, cols = (int(v) for v in lines[0].split(","))
    except ValueError:
        raise DimensionMismatch(f"{path}: first line must be 'rows,cols', got {lines[0]!r}")
    data = [[float(v) for v in line.split(",")] for line in lines[1:]]
    if len(data) != rows or any(len(r) != cols for r in data):
        raise DimensionMismatch(f"{path}: data does not match the declared shape {rows}x{cols}")
    return np.array(data, dtype=float).reshape(rows, cols)


def read_meta(path):
    """Metadata embedded in a JSON or CSV artifact."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    for line in text.splitlines():
        if line.startswith(META_PREFIX):
            return json.loads(line[len(META_PREFIX):])
        if not line.startswith("#"):
            break
    doc = json.loads(text)
    return {k: doc[k] for k in ("tool_version", "config", "seed")}
