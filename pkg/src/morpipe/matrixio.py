"""Matrix text format used for every on-disk matrix.

Plain CSV: no header, one matrix row per line, ``,`` delimiter, ``.``
decimal separator, LF line endings, 17 significant digits (enough to
round-trip any float64 exactly).
"""

import io
import json
from pathlib import Path

import numpy as np

from .errors import InputError


def format_matrix(M):
    A = np.atleast_2d(np.asarray(M, dtype=float))
    buf = io.StringIO()
    for row in A:
        buf.write(",".join(f"{x:.17g}" for x in row))
        buf.write("\n")
    return buf.getvalue()


def write_matrix(path, M):
    Path(path).write_text(format_matrix(M), newline="\n")


def parse_matrix(text, source="<string>"):
    rows = []
    width = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            row = [float(tok) for tok in line.split(",")]
        except ValueError as exc:
            raise InputError(f"{source}:{lineno}: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputError(f"{source}:{lineno}: expected {width} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        return np.zeros((0, 0))
    return np.array(rows, dtype=float)


def read_matrix(path):
    path = Path(path)
    return parse_matrix(path.read_text(), source=str(path))


def complex_to_json(z):
    """Encode a complex array as nested ``[re, im]`` pairs."""
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1).tolist()


def complex_from_json(data):
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def dump_json(path, obj):
    """Write ``obj`` as indented JSON with sorted keys (byte-deterministic)."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", newline="\n")
