"""Atomic file output and the survival/TV CSV schemas."""

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

from .errors import SchemaError

SURVIVAL_COLUMNS = ("n", "surv", "ci_half", "trajectories", "censored")
TV_COLUMNS = ("n", "tv", "err_bound", "weighted")


def fmt(v):
    """Shortest round-trip text for a number; integers stay integral."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def atomic_write(path, data):
    """Write ``data`` (str or bytes) via a temp file and rename.

    Readers never observe a partial file, and a failed write leaves any
    previous file untouched.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raw = data.encode() if isinstance(data, str) else data
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(raw)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def write_csv(path, header, rows):
    return atomic_write(path, csv_text(header, rows))


def write_json(path, obj):
    return atomic_write(path, json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def read_table(path, required=None):
    """Read a CSV with a header row into a dict of float columns.

    Raises
    ------
    SchemaError
        Missing columns, no data rows or non-numeric cells.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if required is not None:
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise SchemaError(f"{path}: no data rows")
    cols = {h: [] for h in header}
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise SchemaError(f"{path}:{i}: expected {len(header)} fields, got {len(r)}")
        for h, v in zip(header, r):
            try:
                cols[h].append(float(v) if v != "" else math.nan)
            except ValueError as exc:
                raise SchemaError(f"{path}:{i}: non-numeric value {v!r} in column {h}") from exc
    return cols
