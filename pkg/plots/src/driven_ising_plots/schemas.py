"""Parsers for the driven-ising result-file formats.

These scripts consume stored results only; nothing here recomputes
physics.  Every parser validates strictly and `serialize_trace_csv`
reproduces a parsed CSV byte-for-byte (floats are written with repr, the
same convention the producer uses), which the round-trip tests rely on.

Formats:
  trace CSV    header `period,observable,value[,stderr]`, one row per
               (period, observable) sample
  trace JSON   {"schema": "timetrace/1", "grid": {...}, "series": {...},
               "metadata": {...}, "stderr": {...}?}
  fit JSON     {"schema": "fit/1", "model", "params", "sigmas", "window",
               "lifetime", "residual", "converged", ...}
  scan layout  manifest.json {"schema": "scan/1", "spec": {...}, ...} plus
               points/<i>_<j>.json records {"schema": "scanpoint/1", ...}
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path


class SchemaError(ValueError):
    """Input file does not match the documented schema."""

    def __init__(self, path, field_name, problem):
        super().__init__(f"{path}: field {field_name!r}: {problem}")
        self.path = str(path)
        self.field = field_name


@dataclass
class TraceTable:
    """Parsed trace CSV: per-series values on a shared period grid."""

    periods: list            # ints, ascending
    series: dict             # name -> list of floats (encounter order)
    stderr: dict | None      # name -> list of float-or-None, if column present

    def values(self, name):
        if name not in self.series:
            raise KeyError(f"trace has no series {name!r} (have {list(self.series)})")
        return self.periods, self.series[name]


def parse_trace_csv(path) -> TraceTable:
    path = Path(path)
    if not path.exists():
        raise SchemaError(path, "file", "does not exist")
    lines = path.read_text().splitlines()
    if not lines:
        raise SchemaError(path, "header", "file is empty")
    header = lines[0].split(",")
    if header[:3] != ["period", "observable", "value"] or len(header) > 4:
        raise SchemaError(path, "header", f"expected period,observable,value[,stderr], got {lines[0]!r}")
    has_err = len(header) == 4

    rows: dict[str, dict[int, tuple]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise SchemaError(path, f"line {lineno}", f"expected {len(header)} columns, got {len(parts)}")
        try:
            n = int(parts[0])
            value = float(parts[2])
        except ValueError as exc:
            raise SchemaError(path, f"line {lineno}", str(exc))
        err = None
        if has_err and parts[3] != "":
            err = float(parts[3])
        rows.setdefault(parts[1], {})[n] = (value, err)

    if not rows:
        raise SchemaError(path, "rows", "no data rows")
    periods = sorted({n for d in rows.values() for n in d})
    series, stderr = {}, {}
    for name, d in rows.items():
        missing = [n for n in periods if n not in d]
        if missing:
            raise SchemaError(path, name, f"missing samples at periods {missing[:3]}")
        series[name] = [d[n][0] for n in periods]
        stderr[name] = [d[n][1] for n in periods]
    return TraceTable(periods, series, stderr if has_err else None)


def serialize_trace_csv(table: TraceTable) -> str:
    """Re-emit the CSV exactly as the producer writes it."""
    has_err = table.stderr is not None
    lines = ["period,observable,value,stderr" if has_err else "period,observable,value"]
    for name, values in table.series.items():
        errs = table.stderr[name] if has_err else None
        for k, n in enumerate(table.periods):
            row = f"{int(n)},{name},{repr(float(values[k]))}"
            if has_err:
                row += "," + ("" if errs[k] is None else repr(float(errs[k])))
            lines.append(row)
    return "\n".join(lines) + "\n"


def _require(doc: dict, path, field_name, expected=None):
    if field_name not in doc:
        raise SchemaError(path, field_name, "missing")
    if expected is not None and doc[field_name] != expected:
        raise SchemaError(path, field_name, f"expected {expected!r}, got {doc[field_name]!r}")
    return doc[field_name]


def parse_trace_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise SchemaError(path, "file", "does not exist")
    doc = json.loads(path.read_text())
    _require(doc, path, "schema", "timetrace/1")
    grid = _require(doc, path, "grid")
    _require(grid, path, "periods")
    series = _require(doc, path, "series")
    for name, values in series.items():
        if len(values) != len(grid["periods"]):
            raise SchemaError(path, f"series.{name}", "length differs from grid")
    return doc


def parse_fit_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise SchemaError(path, "file", "does not exist")
    doc = json.loads(path.read_text())
    _require(doc, path, "schema", "fit/1")
    _require(doc, path, "model")
    _require(doc, path, "params")
    return doc


@dataclass
class ScanGrid:
    """Lifetime surface of a finished scan."""

    eps: list
    eps_prime: list
    lifetime: list            # rows: eps index, cols: eps' index; None = unresolved
    status: list
    manifest: dict = field(repr=False, default_factory=dict)


def parse_scan_dir(path) -> ScanGrid:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise SchemaError(manifest_path, "file", "does not exist")
    manifest = json.loads(manifest_path.read_text())
    _require(manifest, manifest_path, "schema", "scan/1")
    spec = _require(manifest, manifest_path, "spec")
    eps = _require(spec, manifest_path, "eps")
    eps_prime = _require(spec, manifest_path, "eps_prime")

    lifetime = [[None] * len(eps_prime) for _ in eps]
    status = [["missing"] * len(eps_prime) for _ in eps]
    for point_path in sorted((root / "points").glob("*.json")):
        doc = json.loads(point_path.read_text())
        _require(doc, point_path, "schema", "scanpoint/1")
        if doc.get("realization") is not None:
            continue
        i, j = _require(doc, point_path, "i"), _require(doc, point_path, "j")
        if not (0 <= i < len(eps) and 0 <= j < len(eps_prime)):
            raise SchemaError(point_path, "i/j", f"({i},{j}) outside the manifest grid")
        status[i][j] = _require(doc, point_path, "status")
        fit = doc.get("fit")
        if doc["status"] == "ok" and fit and fit.get("lifetime"):
            lifetime[i][j] = fit["lifetime"]
    return ScanGrid(eps, eps_prime, lifetime, status, manifest)
