"""Plain-text writers. Every file is written to a temp name and renamed."""
from __future__ import annotations

import csv
import io
import os
import tempfile

import numpy as np


def fmt(x):
    """17 significant digits, enough to round-trip a double."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def atomic_write_text(path, text):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_vector(path, v):
    """One value per line, 17 significant digits."""
    v = np.asarray(v, dtype=float).ravel()
    atomic_write_text(path, "".join(f"{x:.17g}\n" for x in v))


def read_vector(path):
    return np.loadtxt(path, dtype=float, ndmin=1)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    atomic_write_text(path, buf.getvalue())


def write_record(path, mapping):
    """``key = value`` lines in insertion order."""
    atomic_write_text(path, "".join(f"{k} = {fmt(v)}\n" for k, v in mapping.items()))


def read_record(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def write_matrix_market(path, A, comment=""):
    from scipy.io import mmwrite

    buf = io.BytesIO()
    mmwrite(buf, A.tocoo(), comment=comment, precision=17, symmetry="general")
    atomic_write_text(path, buf.getvalue().decode("ascii"))
