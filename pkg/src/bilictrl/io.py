"""Deterministic artifact serialization.

Every float is printed with 17 significant digits, keys are sorted, and no
run metadata (timestamps, hostnames) is embedded, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import numpy as np

FLOAT_FMT = "%.17g"


def format_float(x) -> str:
    return FLOAT_FMT % float(x)


def _dump(obj, pieces: list, indent: int) -> None:
    pad = "  " * indent
    if obj is None:
        pieces.append("null")
    elif isinstance(obj, bool):
        pieces.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        pieces.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        pieces.append(format_float(obj))
    elif isinstance(obj, str):
        pieces.append('"' + obj.replace("\\", "\\\\").replace('"', '\\"') + '"')
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = list(obj)
        if not items:
            pieces.append("[]")
            return
        pieces.append("[")
        for i, item in enumerate(items):
            _dump(item, pieces, indent)
            if i + 1 < len(items):
                pieces.append(", ")
        pieces.append("]")
    elif isinstance(obj, dict):
        keys = sorted(obj)
        if not keys:
            pieces.append("{}")
            return
        pieces.append("{\n")
        for i, key in enumerate(keys):
            pieces.append(pad + "  " + '"' + str(key) + '": ')
            _dump(obj[key], pieces, indent + 1)
            pieces.append(",\n" if i + 1 < len(keys) else "\n")
        pieces.append(pad + "}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    pieces: list = []
    _dump(obj, pieces, 0)
    pieces.append("\n")
    return "".join(pieces)


def write_json(obj, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps(obj))


def write_csv(path, header, rows) -> None:
    """Rows of floats, formatted; header passed through unchanged."""
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_float(v) for v in row) + "\n")
