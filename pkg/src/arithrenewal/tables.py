"""CSV output with shortest round-trip float formatting (byte-stable across runs)."""
from __future__ import annotations

import csv
import io
import math

import numpy as np


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def csv_text(header, columns):
    """Render equal-length columns as CSV text."""
    cols = [np.asarray(c) if not isinstance(c, list) else c for c in columns]
    n = len(cols[0]) if cols else 0
    if any(len(c) != n for c in cols):
        raise ValueError("columns differ in length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i in range(n):
        w.writerow([fmt(c[i]) for c in cols])
    return buf.getvalue()


def write_csv(path, header, columns):
    text = csv_text(header, columns)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return path
