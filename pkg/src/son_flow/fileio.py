"""File formats and atomic output.

Reports serialize to JSON (sorted keys, shortest round-trip decimals) and to
a two-column CSV of dotted flat keys, both carrying identical numeric
content.  Output files are written atomically (temp file + rename) so a
failing command never leaves partial output behind.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile

import numpy as np


def atomic_write_text(path: str, text: str) -> None:
    """Write `text` to `path` via a temp file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_matrix_file(path: str, matrix: np.ndarray) -> None:
    """Plain text matrix: first line n, then n lines of n numbers."""
    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    lines = [str(n)]
    for row in m:
        lines.append(" ".join(repr(float(x)) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix_file(path: str) -> np.ndarray:
    """Inverse of `write_matrix_file`."""
    with open(path) as handle:
        tokens = handle.read().split()
    if not tokens:
        raise ValueError("matrix file is empty")
    n = int(tokens[0])
    values = [float(t) for t in tokens[1:]]
    if len(values) != n * n:
        raise ValueError(f"expected {n * n} entries after the header, got {len(values)}")
    return np.array(values, dtype=float).reshape(n, n)


def json_report(data: dict) -> str:
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def flatten_report(data, prefix: str = "") -> list[tuple[str, object]]:
    """Dotted flat (key, scalar) pairs, lists indexed numerically."""
    out: list[tuple[str, object]] = []
    if isinstance(data, dict):
        for key in sorted(data):
            sub = f"{prefix}.{key}" if prefix else str(key)
            out.extend(flatten_report(data[key], sub))
    elif isinstance(data, (list, tuple)):
        for i, item in enumerate(data):
            sub = f"{prefix}.{i}" if prefix else str(i)
            out.extend(flatten_report(item, sub))
    else:
        out.append((prefix, data))
    return out


def csv_report(data: dict) -> str:
    """Two-column CSV (key, JSON-encoded scalar) with LF line endings."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for key, value in flatten_report(data):
        writer.writerow([key, json.dumps(value)])
    return buf.getvalue()


def parse_csv_report(text: str) -> dict:
    """Flat {dotted key: scalar} mapping parsed back from `csv_report`."""
    reader = csv.reader(io.StringIO(text))
    rows = list(reader)
    return {key: json.loads(value) for key, value in rows[1:]}
