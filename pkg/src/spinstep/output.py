"""Delimited output files and run metadata.

Floats are written with 17 significant digits so every double round-trips
exactly; files are written to a temporary name and renamed into place.
"""
from __future__ import annotations

import csv
import io
import json
import os
import platform
import tempfile

import numpy as np


def atomic_write_text(path, text: str) -> None:
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


def _cell(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return format(float(value), ".17g")


def table_text(header, rows, fmt: str = "csv") -> str:
    """Render rows as CSV (with header) or JSON lines (one object per row)."""
    buf = io.StringIO()
    if fmt == "csv":
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    elif fmt == "jsonl":
        for row in rows:
            obj = {k: (int(v) if isinstance(v, (int, np.integer)) else float(v)) for k, v in zip(header, row)}
            buf.write(json.dumps(obj) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return buf.getvalue()


def trajectory_table(record):
    """Header and rows ``step, t, s1x, s1y, s1z, ..., observables`` for a trajectory."""
    n_spins = record.states[0].n_spins
    header = ["step", "t"] + [f"s{i + 1}{c}" for i in range(n_spins) for c in "xyz"]
    names = list(record.observables)
    header += names
    spins = record.spins.reshape(len(record), -1)
    rows = []
    for n in range(len(record)):
        row = [n, record.times[n], *spins[n]]
        row += [int(record.observables[k][n]) if k == "iterations" else record.observables[k][n] for k in names]
        rows.append(row)
    return header, rows


def section_table(cloud):
    """Header and rows ``seed, period, s1, s2, s3`` for a single-spin section cloud."""
    header = ["seed", "period"] + [f"s{j + 1}" for j in range(cloud.points.shape[-1] * cloud.points.shape[-2])]
    rows = [[k, m, *p] for k, m, p in cloud.rows()]
    return header, rows


def read_section(path):
    """Read a section CSV back as ``(last period index, points[seed, 3*N])`` of its final rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        last = {}
        for row in reader:
            k, m = int(row[0]), int(row[1])
            if k not in last or m > last[k][0]:
                last[k] = (m, [float(x) for x in row[2:]])
    if not last:
        raise ValueError(f"{path}: no section points")
    periods = {m for m, _ in last.values()}
    if len(periods) != 1:
        raise ValueError(f"{path}: seeds end at different periods {sorted(periods)}")
    n_cols = len(header) - 2
    points = np.array([last[k][1] for k in sorted(last)]).reshape(len(last), n_cols // 3, 3)
    return periods.pop(), points


def environment_info() -> dict:
    from . import __version__

    return {"spinstep": __version__, "numpy": np.__version__, "python": platform.python_version()}


def write_json(path, doc) -> None:
    atomic_write_text(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
