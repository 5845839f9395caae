"""On-disk formats: long-format grid CSVs, tables, JSON sidecars and the run manifest.

All files are UTF-8 with LF line endings and are written atomically
(temporary file in the target directory, then rename).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = 1

WIGNER_HEADER = ("x", "p", "value")
CHI_HEADER = ("re_alpha", "im_alpha", "re_chi", "im_chi")
PN_HEADER = ("n", "probability")
G2_HEADER = ("tau", "g2")
TRAJECTORY_HEADER = ("t", "mean_n", "pop_g", "pop_e1", "pop_e2", "trace_defect")
POINTS_HEADER = (
    "g_h", "g_c", "mean_n", "g2_zero", "g2_zero_literal",
    "converged", "leak", "region", "residual", "error",
)
L1_HEADER = ("g_c", "g_h_star")
L2_HEADER = ("g_c", "g_h_boundary")


def fmt(value) -> str:
    """Round-trip text for a scalar cell."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def jsonable(value):
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return v if math.isfinite(v) else None
    return value


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def table_csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def table_json(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    recs = [dict(zip(header, (jsonable(v) for v in row))) for row in rows]
    return dump_json({"schema_version": SCHEMA_VERSION, "columns": list(header), "rows": recs})


def dump_json(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_table(out_dir: Path, stem: str, header, rows, fmt_name: str = "csv") -> Path:
    rows = list(rows)
    if fmt_name == "json":
        path = Path(out_dir) / f"{stem}.json"
        atomic_write(path, table_json(header, rows))
    else:
        path = Path(out_dir) / f"{stem}.csv"
        atomic_write(path, table_csv(header, rows))
    return path


def write_json(out_dir: Path, name: str, obj) -> Path:
    path = Path(out_dir) / name
    atomic_write(path, dump_json(obj))
    return path


def wigner_rows(grid):
    for i, x in enumerate(grid.x_axis):
        for j, p in enumerate(grid.p_axis):
            yield (float(x), float(p), float(grid.values[i, j]))


def chi_rows(grid):
    for i, ar in enumerate(grid.alpha_re_axis):
        for j, ai in enumerate(grid.alpha_im_axis):
            v = grid.values[i, j]
            yield (float(ar), float(ai), float(v.real), float(v.imag))


def matrix_csv(values: np.ndarray) -> str:
    """Plain matrix export: one line per first-axis index."""
    return "".join(",".join(fmt(float(v)) for v in row) + "\n" for row in np.asarray(values))


def read_table(path: Path) -> list[dict]:
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def config_digest(config: dict) -> str:
    return hashlib.sha256(json.dumps(jsonable(config), sort_keys=True).encode()).hexdigest()
