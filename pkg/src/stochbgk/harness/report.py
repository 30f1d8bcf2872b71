"""CSV tables with a JSON metadata sidecar.

Floats are written with ``repr`` (shortest round-trip form), so identical
inputs give byte-identical CSV files.  The sidecar keeps wall-clock data in a
``volatile`` block that is excluded from ``content_hash``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import REPORT_VERSION


@dataclass
class Table:
    name: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def _parse(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


def table_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def read_table(path: str | Path, name: str | None = None) -> Table:
    p = Path(path)
    with p.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{p} has no header line")
    return Table(name or p.stem, rows[0], [[_parse(v) for v in r] for r in rows[1:]])


def _versions() -> dict:
    from .. import __version__
    return {"stochbgk": __version__, "numpy": np.__version__, "python": platform.python_version()}


def emit_report(tables: list[Table], directory: str | Path, meta: dict | None = None,
                runtime: dict | None = None) -> dict[str, Path]:
    """Write ``<name>.csv`` per table plus ``report.json``; returns written paths."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    index = {}
    for t in tables:
        text = table_csv(t)
        p = out / f"{t.name}.csv"
        p.write_text(text)
        written[t.name] = p
        index[t.name] = {"file": p.name, "columns": t.columns, "rows": len(t.rows),
                         "sha256": hashlib.sha256(text.encode()).hexdigest()}
    stable = {"schema_version": REPORT_VERSION, "versions": _versions(), "meta": meta or {},
              "tables": index}
    blob = json.dumps(stable, sort_keys=True, default=str)
    sidecar = dict(stable)
    sidecar["content_hash"] = hashlib.sha256(blob.encode()).hexdigest()
    sidecar["volatile"] = {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"), "runtime_s": runtime or {}}
    p = out / "report.json"
    p.write_text(json.dumps(sidecar, sort_keys=True, indent=2, default=str) + "\n")
    written["report.json"] = p
    return written


def field_table(name: str, values: np.ndarray, grid, value_name: str) -> Table:
    """(x_index, xi_index, value) rows for a kinetic field or measure profile."""
    nx, nxi = values.shape
    J, M = np.meshgrid(np.arange(nx), np.arange(nxi), indexing="ij")
    rows = [[int(j), int(m), float(v)] for j, m, v in zip(J.ravel(), M.ravel(), values.ravel())]
    return Table(name, ["x_index", "xi_index", value_name], rows)


def snapshot_table(name: str, times: np.ndarray, snapshots: np.ndarray) -> Table:
    rows = [[float(t), int(j), float(u)] for t, snap in zip(times, snapshots) for j, u in enumerate(snap)]
    return Table(name, ["t", "x_index", "u"], rows)
