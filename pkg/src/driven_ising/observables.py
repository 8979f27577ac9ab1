"""Measurement layer: magnetizations, rotating-frame autocorrelators,
bitstring-ensemble averages, and spectral diagnostics.

TimeTrace is the unit of persistence: named observable series on a period
grid, plus enough metadata to reproduce the run.  CSV holds the data table,
JSON the full document including metadata.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import spin
from .model import EffectiveHamiltonian, LatticeSpec, lattice_to_text
from .propagator import PropagatorBundle, TimeGrid, evolve_on_grid

TRACE_SCHEMA = "timetrace/1"
SPECTRUM_SCHEMA = "spectrum/1"

# |<P>| must clear this before an eigenstate gets a parity label.
PARITY_LABEL_THRESHOLD = 0.99

_BOUNDED_PREFIXES = ("m_global", "m_site_", "Z_")


@dataclass
class TimeTrace:
    """Named observable series sampled on a stroboscopic period grid."""

    grid: TimeGrid
    series: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)
    stderr: dict[str, np.ndarray] | None = None

    def __post_init__(self):
        for name, values in self.series.items():
            values = np.asarray(values, dtype=np.float64)
            self.series[name] = values
            if len(values) != len(self.grid):
                raise ValueError(f"series {name!r} length != grid length")
            if name.startswith(_BOUNDED_PREFIXES) and np.abs(values).max() > 1 + 1e-9:
                raise ValueError(f"series {name!r} leaves [-1, 1]")
        if self.stderr is not None:
            for name, values in self.stderr.items():
                if len(values) != len(self.grid):
                    raise ValueError(f"stderr {name!r} length != grid length")


def global_magnetization(state: np.ndarray) -> float:
    """<sum_i sigma_z^i> / L."""
    L = spin.num_sites(state)
    prob = np.abs(state) ** 2
    return float(prob @ spin.total_z_table(L)) / L


def site_magnetization(state: np.ndarray, site: int) -> float:
    """<sigma_z> at a 1-based site."""
    L = spin.num_sites(state)
    return float(np.abs(state) ** 2 @ spin.spin_z_table(L, site))


def magnetization_observer(L: int, sites: Sequence[int] = ()) -> Callable:
    """Observer returning (m_global, m_site..) tuples for evolve_on_grid."""
    total = spin.total_z_table(L) / L
    site_tables = [spin.spin_z_table(L, s) for s in sites]

    def observe(psi: np.ndarray):
        prob = np.abs(psi) ** 2
        return (float(prob @ total), *(float(prob @ tbl) for tbl in site_tables))

    return observe


def run_metadata(
    lattice: LatticeSpec,
    params,
    initial: str,
    strategy: str,
    seed: int | None = None,
    **extra,
) -> dict:
    meta = {
        "lattice": lattice_to_text(lattice),
        "t1": params.t1,
        "initial_state": initial,
        "strategy": strategy,
    }
    if seed is not None:
        meta["seed"] = seed
    meta.update(extra)
    return meta


def magnetization_trace(
    state: np.ndarray,
    bundle: PropagatorBundle,
    grid: TimeGrid,
    sites: Sequence[int] = (),
    strategy: str = "auto",
    metadata: dict | None = None,
) -> TimeTrace:
    """Global (and optional per-site) magnetization along a Floquet run."""
    observer = magnetization_observer(bundle.L, sites)
    samples = evolve_on_grid(state, bundle, grid, strategy=strategy, observer=observer)
    series = {"m_global": samples[:, 0]}
    for k, s in enumerate(sites):
        series[f"m_site_{s}"] = samples[:, k + 1]
    return TimeTrace(grid, series, metadata or {})


def autocorrelator_trace(
    bits: Sequence[int],
    bundle: PropagatorBundle,
    grid: TimeGrid,
    sites: Sequence[int],
    strategy: str = "auto",
    metadata: dict | None = None,
) -> TimeTrace:
    """Rotating-frame autocorrelators Z_i(n) for a bitstring initial state.

    For a sigma_z product state the two-time correlator factorizes, so
    Z_i(n) = z_i(0) <sigma_z^i>(n) (-1)^n.  One evolution pass serves all
    requested sites.
    """
    if len(bits) != bundle.L:
        raise ValueError("bitstring length does not match the chain")
    state = spin.make_bitstring_state(bits)
    z0 = np.array([1 - 2 * int(b) for b in bits], dtype=np.float64)
    observer = magnetization_observer(bundle.L, sites)
    samples = evolve_on_grid(state, bundle, grid, strategy=strategy, observer=observer)
    signs = np.where(grid.periods % 2 == 0, 1.0, -1.0)
    series = {}
    for k, s in enumerate(sites):
        series[f"Z_{s}"] = z0[s - 1] * samples[:, k + 1] * signs
    return TimeTrace(grid, series, metadata or {})


@dataclass(frozen=True)
class BitstringSampler:
    """Deterministic per-member bitstring source (member k -> bits)."""

    L: int
    seed: int = 0

    def __call__(self, member: int) -> np.ndarray:
        seq = np.random.SeedSequence(entropy=self.seed, spawn_key=(member,))
        return spin.sample_random_bitstring(self.L, np.random.default_rng(seq))


def ensemble_average(
    sampler: Callable[[int], Sequence[int]],
    count: int,
    trace_producer: Callable[[Sequence[int]], TimeTrace],
    jobs: int = 1,
) -> TimeTrace:
    """Pointwise mean over `count` independent bitstring traces.

    Members are independent tasks; accumulation is indexed by member, so
    the result does not depend on scheduling order.  Per-point standard
    errors are recorded for count > 1.
    """
    if count < 1:
        raise ValueError("ensemble count must be >= 1")

    def member_trace(k: int) -> TimeTrace:
        return trace_producer(sampler(k))

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(member_trace, range(count)))
    else:
        traces = [member_trace(k) for k in range(count)]

    first = traces[0]
    series: dict[str, np.ndarray] = {}
    stderr: dict[str, np.ndarray] = {}
    for name in first.series:
        stack = np.stack([tr.series[name] for tr in traces])
        series[name] = stack.mean(axis=0)
        if count > 1:
            stderr[name] = stack.std(axis=0, ddof=1) / np.sqrt(count)
    metadata = dict(first.metadata)
    metadata["ensemble_count"] = count
    if isinstance(sampler, BitstringSampler):
        metadata["ensemble_seed"] = sampler.seed
    return TimeTrace(first.grid, series, metadata, stderr=stderr if count > 1 else None)


@dataclass(frozen=True)
class SpectrumReport:
    """Eigenvalues with parity and domain-wall structure of the lowest pair."""

    eigenvalues: np.ndarray
    parity: tuple            # +1 / -1 per eigenstate, None where mixed
    domain_wall: tuple       # dominant domain-wall sector per eigenstate
    delta: float             # E_1 - E_0

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("lowest-pair splitting must be non-negative")


def spectrum_report(H_eff: EffectiveHamiltonian, parity_labels: bool = True) -> SpectrumReport:
    """Full diagonalization with parity and domain-wall labels.

    Parity labeling requires all longitudinal fields to vanish (the label
    is read from <P>, which is conserved only then); near-degenerate pairs
    whose numerical eigenvectors mix the sectors come back as None.
    """
    if parity_labels and any(hi != 0.0 for hi in H_eff.lattice.h):
        raise ValueError("parity labels are defined only for h = 0")
    L = H_eff.lattice.L
    energies, vectors = np.linalg.eigh(H_eff.matrix)

    parity: list = []
    if parity_labels:
        for k in range(len(energies)):
            v = vectors[:, k]
            p = float(np.real(np.vdot(v, v[::-1])))
            if p > PARITY_LABEL_THRESHOLD:
                parity.append(1)
            elif p < -PARITY_LABEL_THRESHOLD:
                parity.append(-1)
            else:
                parity.append(None)
    else:
        parity = [None] * len(energies)

    dw_table = spin.domain_wall_table(L)
    domain_wall = []
    for k in range(len(energies)):
        weights = np.bincount(dw_table, weights=np.abs(vectors[:, k]) ** 2, minlength=L)
        domain_wall.append(int(np.argmax(weights)))  # argmax ties break low

    return SpectrumReport(
        eigenvalues=energies,
        parity=tuple(parity),
        domain_wall=tuple(domain_wall),
        delta=float(energies[1] - energies[0]),
    )


# ---------------------------------------------------------------------------
# Persistence.  CSV is long format (period, observable, value[, stderr]);
# floats are written with repr() so parsing them back is exact.


def _fmt(x: float) -> str:
    return repr(float(x))


def trace_to_csv(trace: TimeTrace) -> str:
    has_err = trace.stderr is not None
    lines = ["period,observable,value,stderr" if has_err else "period,observable,value"]
    for name in trace.series:
        values = trace.series[name]
        errs = trace.stderr.get(name) if has_err else None
        for k, n in enumerate(trace.grid.periods):
            row = f"{int(n)},{name},{_fmt(values[k])}"
            if has_err:
                row += "," + (_fmt(errs[k]) if errs is not None else "")
            lines.append(row)
    return "\n".join(lines) + "\n"


def trace_to_json(trace: TimeTrace) -> dict:
    doc = {
        "schema": TRACE_SCHEMA,
        "grid": {
            "periods": [int(n) for n in trace.grid.periods],
            "even_only": trace.grid.even_only,
            "points_per_decade": trace.grid.points_per_decade,
        },
        "series": {k: [float(x) for x in v] for k, v in trace.series.items()},
        "metadata": trace.metadata,
    }
    if trace.stderr is not None:
        doc["stderr"] = {k: [float(x) for x in v] for k, v in trace.stderr.items()}
    return doc


def trace_from_json(doc: dict) -> TimeTrace:
    if doc.get("schema") != TRACE_SCHEMA:
        raise ValueError(f"not a {TRACE_SCHEMA} document")
    grid = TimeGrid(
        np.array(doc["grid"]["periods"], dtype=np.int64),
        even_only=doc["grid"]["even_only"],
        points_per_decade=doc["grid"]["points_per_decade"],
    )
    stderr = doc.get("stderr")
    return TimeTrace(
        grid,
        {k: np.array(v) for k, v in doc["series"].items()},
        doc.get("metadata", {}),
        stderr={k: np.array(v) for k, v in stderr.items()} if stderr else None,
    )


def write_trace(trace: TimeTrace, csv_path, json_path=None):
    with open(csv_path, "w") as f:
        f.write(trace_to_csv(trace))
    if json_path is not None:
        with open(json_path, "w") as f:
            json.dump(trace_to_json(trace), f, indent=1)
            f.write("\n")


def read_trace_json(path) -> TimeTrace:
    with open(path) as f:
        return trace_from_json(json.load(f))


def read_trace_csv(path) -> TimeTrace:
    """Rebuild a TimeTrace (sans metadata) from the CSV table."""
    with open(path) as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    if header[:3] != ["period", "observable", "value"]:
        raise ValueError(f"unrecognized trace CSV header {header!r}")
    has_err = len(header) == 4
    by_name: dict[str, dict[int, float]] = {}
    err_by_name: dict[str, dict[int, float]] = {}
    for row in rows:
        n, name, value = int(row[0]), row[1], float(row[2])
        by_name.setdefault(name, {})[n] = value
        if has_err and len(row) > 3 and row[3]:
            err_by_name.setdefault(name, {})[n] = float(row[3])
    periods = np.array(sorted({n for d in by_name.values() for n in d}), dtype=np.int64)
    series = {
        name: np.array([d[n] for n in periods]) for name, d in by_name.items()
    }
    stderr = (
        {name: np.array([d[n] for n in periods]) for name, d in err_by_name.items()}
        if err_by_name
        else None
    )
    return TimeTrace(TimeGrid(periods), series, {}, stderr=stderr)


def spectrum_to_json(report: SpectrumReport) -> dict:
    return {
        "schema": SPECTRUM_SCHEMA,
        "eigenvalues": [float(e) for e in report.eigenvalues],
        "parity": ["mixed" if p is None else p for p in report.parity],
        "domain_wall": list(report.domain_wall),
        "delta": float(report.delta),
    }


def write_spectrum(report: SpectrumReport, path):
    with open(path, "w") as f:
        json.dump(spectrum_to_json(report), f, indent=1)
        f.write("\n")
