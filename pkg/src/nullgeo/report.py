"""Line-oriented ``key=value`` reports.

The first line is ``# nullgeo report v1``; other ``#`` lines are comments.
Every other line is ``key=value`` with the key made of ``[A-Za-z0-9_.:-]``
and the value in one of these forms:

* integer: ``42``
* real: Python ``repr`` of a float (``0.1``, ``-2.5e-09``, ``inf``, ``nan``)
* vector: reals joined by ``;`` (a one-element vector ends with ``;``)
* matrix: vectors joined by ``|`` (a one-row matrix ends with ``|``)
* text: anything else (``;`` and ``|`` are not allowed in text)

``repr`` gives the shortest string that reads back to the same double, so
re-parsing a report reproduces every number bit for bit.
"""

import math
import re

import numpy as np

HEADER = "# nullgeo report v1"
_KEY = re.compile(r"^[A-Za-z0-9_.:\-]+$")
_INT = re.compile(r"^[+-]?[0-9]+$")


def format_float(x):
    return repr(float(x))


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if isinstance(value, str):
        if any(ch in value for ch in ";|\n") or _looks_numeric(value) or value in ("true", "false"):
            raise ValueError(f"text value {value!r} is not representable")
        return value
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        body = ";".join(format_float(v) for v in arr)
        return body + ";" if arr.size == 1 else body
    if arr.ndim == 2:
        body = "|".join(format_value(row) for row in arr)
        return body + "|" if arr.shape[0] == 1 else body
    raise ValueError("only scalars, vectors and matrices are supported")


def _looks_numeric(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def parse_value(text):
    if text in ("true", "false"):
        return text == "true"
    if "|" in text:
        rows = text.split("|")
        if rows[-1] == "":
            rows = rows[:-1]
        return np.array([parse_value(row) for row in rows], dtype=float)
    if ";" in text:
        parts = [p for p in text.split(";")]
        if parts[-1] == "":
            parts = parts[:-1]
        return np.array([float(p) for p in parts], dtype=float)
    if _INT.match(text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        return text


class Report:
    """Ordered ``key=value`` pairs; keys must be unique."""

    def __init__(self, command=None):
        self._items = []
        self._keys = set()
        if command is not None:
            self.add("command", command)

    def add(self, key, value):
        if not _KEY.match(key):
            raise ValueError(f"bad report key {key!r}")
        if key in self._keys:
            raise ValueError(f"duplicate report key {key!r}")
        self._keys.add(key)
        self._items.append((key, format_value(value)))
        return self

    def items(self):
        return list(self._items)

    def render(self):
        return "\n".join([HEADER] + [f"{k}={v}" for k, v in self._items]) + "\n"

    def __str__(self):
        return self.render()


def parse_report(text):
    """Dict of typed values; inverse of :meth:`Report.render`."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != HEADER:
        raise ValueError("missing report header")
    out = {}
    for ln in lines[1:]:
        if not ln.strip() or ln.startswith("#"):
            continue
        key, _, value = ln.partition("=")
        out[key] = parse_value(value)
    return out


def same_number(a, b):
    """Bit-level equality that also matches NaN with NaN."""
    if isinstance(a, float) and isinstance(b, float) and math.isnan(a) and math.isnan(b):
        return True
    return a == b
