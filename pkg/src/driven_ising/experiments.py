"""Scan orchestration: (eps, eps') grids, disorder averaging, persistence.

A scan writes an append-only directory: manifest.json plus one JSON record
per grid point under points/ and one CSV trace per point under traces/.
Finished points are skipped on resume, and results are deterministic for a
fixed spec and seed regardless of parallelism.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import spin
from ._version import __version__
from .model import (
    DisorderDistribution,
    FloquetParams,
    GEOMETRIES,
    build_geometry,
    parse_key_values,
    sample_disorder,
)
from .observables import (
    BitstringSampler,
    TimeTrace,
    autocorrelator_trace,
    ensemble_average,
    magnetization_trace,
    read_trace_csv,
    run_metadata,
    trace_to_csv,
)
from .fitting import (
    FitError,
    FitResult,
    RESOLVABLE_WINDOW,
    fit_cosine,
    fit_sigmoid,
    fit_to_json,
)
from .propagator import STRATEGIES, build_bundle, default_strategy, log_grid

SCAN_SCHEMA = "scan/1"
POINT_SCHEMA = "scanpoint/1"

STATUS_OK = "ok"
STATUS_HIGH = "unresolved-high"
STATUS_LOW = "unresolved-low"
STATUS_FAILED = "failed"

# Cosine amplitudes below this are treated as an already-decayed trace.
MIN_RESOLVED_AMPLITUDE = 0.02

PROTOCOLS = ("polarized", "bitstrings")


@dataclass(frozen=True)
class ScanSpec:
    """Full description of one parameter scan."""

    eps_values: tuple[float, ...]
    eps_prime_values: tuple[float, ...]
    geometry: str = "chain-boundary"
    L: int = 8
    t1: float = 1.0
    J: float = 1.0
    h: float = 0.0
    protocol: str = "polarized"
    ensemble_count: int = 100
    strategy: str = "auto"
    periods: float = 1e10
    points_per_decade: int = 30
    even_only: bool = True
    disorder: DisorderDistribution | None = None
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        object.__setattr__(self, "eps_values", tuple(float(x) for x in self.eps_values))
        object.__setattr__(
            self, "eps_prime_values", tuple(float(x) for x in self.eps_prime_values)
        )
        if not self.eps_values or not self.eps_prime_values:
            raise ValueError("eps and eps_prime grids must be non-empty")
        for x in self.eps_values + self.eps_prime_values:
            if not (0.0 < x <= 1.0):
                raise ValueError(f"deviation {x} outside (0, 1]")
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"unknown geometry {self.geometry!r}")
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}")
        if self.strategy not in ("auto",) + STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.ensemble_count < 1 or self.jobs < 1:
            raise ValueError("ensemble_count and jobs must be >= 1")

    @property
    def params(self) -> FloquetParams:
        return FloquetParams(t1=self.t1)

    def to_config_dict(self) -> dict:
        d = {
            "geometry": self.geometry,
            "L": self.L,
            "t1": self.t1,
            "J": self.J,
            "h": self.h,
            "eps": list(self.eps_values),
            "eps_prime": list(self.eps_prime_values),
            "protocol": (
                f"bitstrings:{self.ensemble_count}"
                if self.protocol == "bitstrings"
                else self.protocol
            ),
            "strategy": self.strategy,
            "periods": self.periods,
            "points_per_decade": self.points_per_decade,
            "even_only": self.even_only,
            "seed": self.seed,
            "jobs": self.jobs,
        }
        if self.disorder is not None:
            d["disorder_J"] = list(self.disorder.J_range)
            d["disorder_h"] = list(self.disorder.h_range)
            d["realizations"] = self.disorder.realizations
            d["disorder_seed"] = self.disorder.base_seed
        return d


def scan_spec_from_config(text: str) -> ScanSpec:
    """Build a ScanSpec from the flat `key = value` config format."""
    values = parse_key_values(text)
    if "eps" not in values or "eps_prime" not in values:
        raise ValueError("scan config needs 'eps' and 'eps_prime' grids")

    protocol = values.get("protocol", "polarized")
    count = 100
    if isinstance(protocol, str) and protocol.startswith("bitstrings"):
        protocol, _, n = protocol.partition(":")
        count = int(n) if n else count
        protocol = "bitstrings"

    as_tuple = lambda v: tuple(v) if isinstance(v, list) else (v,)
    disorder = None
    if "disorder_J" in values or "disorder_h" in values:
        disorder = DisorderDistribution(
            J_range=tuple(values.get("disorder_J", [1.0, 1.0])),
            h_range=tuple(values.get("disorder_h", [0.0, 0.0])),
            realizations=int(values.get("realizations", 250)),
            base_seed=int(values.get("disorder_seed", values.get("seed", 0))),
        )
    return ScanSpec(
        eps_values=as_tuple(values["eps"]),
        eps_prime_values=as_tuple(values["eps_prime"]),
        geometry=values.get("geometry", "chain-boundary"),
        L=int(values.get("L", 8)),
        t1=float(values.get("t1", 1.0)),
        J=float(values.get("J", 1.0)),
        h=float(values.get("h", 0.0)),
        protocol=protocol,
        ensemble_count=count,
        strategy=values.get("strategy", "auto"),
        periods=float(values.get("periods", 1e10)),
        points_per_decade=int(values.get("points_per_decade", 30)),
        even_only=bool(values.get("even_only", True)),
        disorder=disorder,
        seed=int(values.get("seed", 0)),
        jobs=int(values.get("jobs", 1)),
    )


@dataclass
class PointResult:
    trace: TimeTrace
    fit: FitResult | None
    status: str


@dataclass
class ScanResult:
    manifest: dict
    points: dict          # (i, j) -> point record dict
    out_dir: Path | None = None


def observable_sites(geometry: str, L: int) -> tuple[int, int, int]:
    """(metronome, bulk, far edge) sites probed by the ensemble protocol."""
    lattice = build_geometry(geometry, L)
    m = lattice.metronome_site
    edge = L - 1 if geometry == "external" else L
    bulk = (edge + 1) // 2
    if bulk in (m, edge):
        bulk = max(2, edge // 2)
    return (m, bulk, edge)


def _classify(fit: FitResult | None, err: FitError | None, trace: TimeTrace) -> str:
    lo, hi = RESOLVABLE_WINDOW
    if err is not None:
        if err.reason == "period-beyond-window":
            return STATUS_HIGH
        if err.reason in ("no-seed", "no-decay", "too-few-points"):
            y = trace.series.get("m_global")
            if y is not None:
                mask = trace.grid.periods >= lo
                if mask.any() and abs(float(np.mean(y[mask]))) > 0.25:
                    return STATUS_HIGH
            return STATUS_LOW
        return STATUS_FAILED
    if fit.lifetime is None:
        return STATUS_OK
    if fit.lifetime > hi:
        return STATUS_HIGH
    if fit.lifetime < lo or fit.params.get("A", 1.0) < MIN_RESOLVED_AMPLITUDE:
        return STATUS_LOW
    return STATUS_OK


def _polarized_trace(spec: ScanSpec, eps, eps_prime, realization=None) -> TimeTrace:
    lattice = build_geometry(spec.geometry, spec.L, spec.J, spec.h, eps, eps_prime)
    initial = "polarized"
    if realization is not None:
        lattice = sample_disorder(lattice, spec.disorder, realization)
        initial = f"polarized/realization={realization}"
    strategy = spec.strategy if spec.strategy != "auto" else default_strategy(spec.L)
    bundle = build_bundle(
        lattice, spec.params, dense=strategy != "step", spectral=strategy == "spectral"
    )
    grid = log_grid(spec.periods, spec.points_per_decade, spec.even_only)
    state = spin.make_polarized_state(spec.L)
    meta = run_metadata(lattice, spec.params, initial, strategy, seed=spec.seed)
    sites = (lattice.metronome_site,) if lattice.metronome_site else ()
    return magnetization_trace(state, bundle, grid, sites, strategy, meta)


def disorder_average(spec: ScanSpec, eps: float, eps_prime: float) -> TimeTrace:
    """Pointwise mean of the polarized magnetization over all realizations."""
    if spec.disorder is None:
        raise ValueError("scan spec has no disorder distribution")
    traces = [
        _polarized_trace(spec, eps, eps_prime, realization=r)
        for r in range(spec.disorder.realizations)
    ]
    return average_traces(traces, extra={"realizations": spec.disorder.realizations})


def average_traces(traces: list[TimeTrace], extra: dict | None = None) -> TimeTrace:
    first = traces[0]
    series, stderr = {}, {}
    for name in first.series:
        stack = np.stack([tr.series[name] for tr in traces])
        series[name] = stack.mean(axis=0)
        if len(traces) > 1:
            stderr[name] = stack.std(axis=0, ddof=1) / np.sqrt(len(traces))
    meta = dict(first.metadata)
    meta.update(extra or {})
    return TimeTrace(first.grid, series, meta, stderr=stderr if len(traces) > 1 else None)


def run_point(spec: ScanSpec, eps: float, eps_prime: float, realization=None) -> PointResult:
    """Simulate, fit, and classify one grid point.

    Fit errors are folded into the status instead of propagating, so scans
    never abort on an unresolvable point.
    """
    if spec.protocol == "bitstrings":
        lattice = build_geometry(spec.geometry, spec.L, spec.J, spec.h, eps, eps_prime)
        strategy = spec.strategy if spec.strategy != "auto" else default_strategy(spec.L)
        bundle = build_bundle(
            lattice, spec.params, dense=strategy != "step", spectral=strategy == "spectral"
        )
        grid = log_grid(spec.periods, spec.points_per_decade, spec.even_only)
        sites = observable_sites(spec.geometry, spec.L)
        sampler = BitstringSampler(spec.L, spec.seed)
        meta = run_metadata(
            lattice, spec.params, f"bitstrings:{spec.ensemble_count}", strategy,
            seed=spec.seed,
        )
        trace = ensemble_average(
            sampler,
            spec.ensemble_count,
            lambda bits: autocorrelator_trace(bits, bundle, grid, sites, strategy, meta),
            jobs=spec.jobs,
        )
        return PointResult(trace, None, STATUS_OK)

    if spec.disorder is not None and realization is None:
        trace = disorder_average(spec, eps, eps_prime)
        fit, err = None, None
        try:
            fit = fit_sigmoid(trace, series="m_global")
        except FitError as e:
            err = e
        return PointResult(trace, fit, _classify(fit, err, trace))

    trace = _polarized_trace(spec, eps, eps_prime, realization)
    if realization is not None:
        return PointResult(trace, None, STATUS_OK)  # fits run on the average
    fit, err = None, None
    try:
        fit = fit_cosine(trace, series="m_global")
    except FitError as e:
        err = e
    return PointResult(trace, fit, _classify(fit, err, trace))


# ---------------------------------------------------------------------------
# Persistence


def _atomic_write(path: Path, payload: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(payload)
    os.replace(tmp, path)


def _point_key(i: int, j: int, realization=None) -> str:
    key = f"{i:03d}_{j:03d}"
    if realization is not None:
        key += f"_{realization:03d}"
    return key


def _write_point(out_dir: Path, key: str, record: dict, trace: TimeTrace):
    _atomic_write(out_dir / "traces" / f"{key}.csv", trace_to_csv(trace))
    _atomic_write(out_dir / "points" / f"{key}.json", json.dumps(record, indent=1) + "\n")


def _point_record(spec, i, j, eps, eps_prime, result: PointResult | None, realization=None) -> dict:
    key = _point_key(i, j, realization)
    return {
        "schema": POINT_SCHEMA,
        "i": i,
        "j": j,
        "realization": realization,
        "eps": eps,
        "eps_prime": eps_prime,
        "status": result.status if result is not None else STATUS_FAILED,
        "fit": fit_to_json(result.fit) if result is not None and result.fit is not None else None,
        "trace_csv": f"traces/{key}.csv" if result is not None else None,
    }


def run_scan(spec: ScanSpec, out_dir, resume: bool = True, progress=None) -> ScanResult:
    """Execute every grid point (x realizations) with bounded parallelism.

    Each finished point is written immediately; an interrupted scan picks
    up where it left off when rerun with resume=True (the default).
    """
    out = Path(out_dir)
    (out / "points").mkdir(parents=True, exist_ok=True)
    (out / "traces").mkdir(exist_ok=True)

    wall: dict[str, float] = {}
    computed = {"n": 0}

    def done(key: str) -> bool:
        return resume and (out / "points" / f"{key}.json").exists()

    def note(key):
        if progress is not None:
            progress(key)

    tasks = []
    realizations = spec.disorder.realizations if spec.disorder is not None else None
    for i, eps in enumerate(spec.eps_values):
        for j, eps_prime in enumerate(spec.eps_prime_values):
            if realizations is not None and spec.protocol == "polarized":
                for r in range(realizations):
                    tasks.append((i, j, eps, eps_prime, r))
            tasks.append((i, j, eps, eps_prime, None))

    def execute(task):
        i, j, eps, eps_prime, r = task
        key = _point_key(i, j, r)
        if done(key):
            return
        start = time.perf_counter()
        try:
            if r is None and realizations is not None and spec.protocol == "polarized":
                # aggregate over already-persisted realization traces
                member_traces = [
                    read_trace_csv(out / "traces" / f"{_point_key(i, j, rr)}.csv")
                    for rr in range(realizations)
                ]
                trace = average_traces(member_traces, extra={"realizations": realizations})
                fit, err = None, None
                try:
                    fit = fit_sigmoid(trace, series="m_global")
                except FitError as e:
                    err = e
                result = PointResult(trace, fit, _classify(fit, err, trace))
            else:
                result = run_point(spec, eps, eps_prime, realization=r)
        except Exception as exc:  # simulation errors land in the record
            record = _point_record(spec, i, j, eps, eps_prime, None, r)
            record["error"] = f"{type(exc).__name__}: {exc}"
            _atomic_write(out / "points" / f"{key}.json", json.dumps(record, indent=1) + "\n")
        else:
            record = _point_record(spec, i, j, eps, eps_prime, result, r)
            _write_point(out, key, record, result.trace)
        wall[key] = time.perf_counter() - start
        computed["n"] += 1
        note(key)

    realization_tasks = [t for t in tasks if t[4] is not None]
    aggregate_tasks = [t for t in tasks if t[4] is None]
    for phase in (realization_tasks, aggregate_tasks):
        if not phase:
            continue
        if spec.jobs > 1:
            with ThreadPoolExecutor(max_workers=spec.jobs) as pool:
                list(pool.map(execute, phase))
        else:
            for task in phase:
                execute(task)

    manifest = {
        "schema": SCAN_SCHEMA,
        "spec": spec.to_config_dict(),
        "code_version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "wall_clock": wall,
        "computed_points": computed["n"],
    }
    _atomic_write(out / "manifest.json", json.dumps(manifest, indent=1) + "\n")
    return load_scan(out)


def load_scan(out_dir) -> ScanResult:
    out = Path(out_dir)
    with open(out / "manifest.json") as f:
        manifest = json.load(f)
    points = {}
    for path in sorted((out / "points").glob("*.json")):
        with open(path) as f:
            record = json.load(f)
        if record.get("realization") is None:
            points[(record["i"], record["j"])] = record
    return ScanResult(manifest, points, out)


def lifetime_table(scan: ScanResult, axis: str = "eps_prime", other_value=None):
    """(x, lifetime) pairs for resolved points along one scan axis."""
    if axis not in ("eps", "eps_prime"):
        raise ValueError("axis must be 'eps' or 'eps_prime'")
    other = "eps" if axis == "eps_prime" else "eps_prime"
    rows = []
    for record in scan.points.values():
        if other_value is not None and record[other] != other_value:
            continue
        fit = record.get("fit")
        if record["status"] == STATUS_OK and fit and fit.get("lifetime"):
            rows.append((record[axis], fit["lifetime"]))
    return sorted(rows)


def write_lifetime_table(rows, path):
    lines = ["x,lifetime"] + [f"{repr(float(x))},{repr(float(y))}" for x, y in rows]
    _atomic_write(Path(path), "\n".join(lines) + "\n")
