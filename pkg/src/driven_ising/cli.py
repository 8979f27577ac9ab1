"""Command-line interface: simulate, scan, spectrum, and fit workflows.

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Every run writes
a JSON document echoing the fully resolved configuration so outputs can be
reproduced byte-for-byte (modulo timestamps).  Relative --out paths are
resolved against $DRIVEN_ISING_OUTDIR when it is set.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

from ._version import __version__
from . import spin
from .experiments import (
    lifetime_table,
    load_scan,
    observable_sites,
    run_scan,
    scan_spec_from_config,
    write_lifetime_table,
)
from .fitting import (
    FitError,
    fit_cosine,
    fit_power_law,
    fit_sigmoid,
    write_fit,
)
from .model import (
    FloquetParams,
    GEOMETRIES,
    build_geometry,
    bulk_effective_hamiltonian,
    first_order_magnus,
    one_period_average_hamiltonian,
    two_period_average_hamiltonian,
)
from .observables import (
    BitstringSampler,
    autocorrelator_trace,
    ensemble_average,
    magnetization_trace,
    read_trace_csv,
    read_trace_json,
    run_metadata,
    spectrum_report,
    spectrum_to_json,
    write_trace,
)
from .propagator import build_bundle, default_strategy, linear_grid, log_grid


class UsageError(ValueError):
    pass


OUTDIR_ENV = "DRIVEN_ISING_OUTDIR"


def _out_path(raw: str) -> Path:
    path = Path(raw)
    base = os.environ.get(OUTDIR_ENV)
    if base and not path.is_absolute():
        return Path(base) / path
    return path


def _parse_grid(text: str):
    kind, _, value = text.partition(":")
    if kind == "log":
        return ("log", int(value) if value else 30)
    if kind == "linear":
        return ("linear", int(value) if value else 1)
    raise UsageError(f"--grid must be log:PPD or linear:STEP, got {text!r}")


def _parse_initial(text: str):
    if text == "polarized":
        return ("polarized", None)
    if text.startswith("bitstrings"):
        _, _, n = text.partition(":")
        if not n:
            raise UsageError("--initial bitstrings needs a count, e.g. bitstrings:500")
        return ("bitstrings", int(n))
    raise UsageError(f"--initial must be polarized or bitstrings:N, got {text!r}")


def cmd_simulate(args) -> int:
    protocol, count = _parse_initial(args.initial)
    grid_kind, grid_value = _parse_grid(args.grid)
    lattice = build_geometry(args.geometry, args.L, args.J, args.h, args.eps, args.eps_prime)
    params = FloquetParams(t1=args.t1)
    strategy = args.strategy if args.strategy != "auto" else default_strategy(args.L)

    if grid_kind == "log":
        grid = log_grid(args.periods, grid_value, args.even_only)
    else:
        start = 2 if args.even_only else 0
        step = grid_value * 2 if args.even_only else grid_value
        grid = linear_grid(start, int(args.periods), step, args.even_only)

    bundle = build_bundle(
        lattice, params, dense=strategy != "step", spectral=strategy == "spectral"
    )
    meta = run_metadata(
        lattice, params, args.initial, strategy, seed=args.seed,
        geometry=args.geometry, command="simulate", version=__version__,
    )

    if protocol == "polarized":
        sites = _observable_sites_from_flags(args, lattice)
        state = spin.make_polarized_state(args.L)
        trace = magnetization_trace(state, bundle, grid, sites, strategy, meta)
    else:
        sites = _autocorrelator_sites_from_flags(args, lattice)
        sampler = BitstringSampler(args.L, args.seed)
        trace = ensemble_average(
            sampler,
            count,
            lambda bits: autocorrelator_trace(bits, bundle, grid, sites, strategy, meta),
            jobs=args.jobs,
        )

    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out.with_suffix(".csv"), out.with_suffix(".json"))
    print(f"wrote {out.with_suffix('.csv')} and {out.with_suffix('.json')}")
    return 0


def _observable_sites_from_flags(args, lattice):
    if args.observables:
        sites = []
        for token in args.observables:
            if token == "m_global":
                continue
            if token.startswith("m_site:"):
                sites.append(int(token.split(":", 1)[1]))
            else:
                raise UsageError(f"unknown observable {token!r} for polarized runs")
        return tuple(sites)
    return (lattice.metronome_site,) if lattice.metronome_site else ()


def _autocorrelator_sites_from_flags(args, lattice):
    if args.observables:
        sites = []
        for token in args.observables:
            if token.startswith("Z:"):
                sites.append(int(token.split(":", 1)[1]))
            else:
                raise UsageError(f"unknown observable {token!r} for bitstring runs")
        return tuple(sites)
    return observable_sites(args.geometry, args.L)


def cmd_scan(args) -> int:
    text = Path(args.config).read_text()
    spec = scan_spec_from_config(text)
    if args.jobs is not None:
        spec = dataclasses.replace(spec, jobs=args.jobs)

    total = len(spec.eps_values) * len(spec.eps_prime_values)
    done = {"n": 0}

    def progress(key):
        done["n"] += 1
        print(f"[{done['n']}] finished point {key}", file=sys.stderr)

    out = _out_path(args.out)
    run_scan(spec, out, resume=args.resume, progress=progress)
    print(f"scan complete: {total} grid points in {out}")
    return 0


def cmd_spectrum(args) -> int:
    lattice = build_geometry(args.geometry, args.L, args.J, args.h, args.eps, args.eps_prime)
    params = FloquetParams(t1=args.t1)
    builders = {
        "one-period": one_period_average_hamiltonian,
        "two-period": two_period_average_hamiltonian,
        "magnus1": first_order_magnus,
    }
    if args.effective == "bulk":
        H = bulk_effective_hamiltonian(lattice, params, metronome_up=args.orientation == "up")
    else:
        H = builders[args.effective](lattice, params)
    report = spectrum_report(H, parity_labels=not args.no_parity)
    doc = spectrum_to_json(report)
    doc["config"] = {
        "effective": args.effective, "geometry": args.geometry, "L": args.L,
        "t1": args.t1, "J": args.J, "h": args.h, "eps": args.eps,
        "eps_prime": args.eps_prime, "orientation": args.orientation,
        "version": __version__,
    }
    doc_path = _out_path(args.out)
    doc_path.parent.mkdir(parents=True, exist_ok=True)
    tmp = doc_path.with_suffix(doc_path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=1) + "\n")
    os.replace(tmp, doc_path)
    print(f"delta = {report.delta:.6e}; wrote {doc_path}")
    return 0


def _load_xy_csv(path: Path):
    rows = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError:
                continue  # header line
    if not rows:
        raise UsageError(f"no (x, y) rows found in {path}")
    return rows


def cmd_fit(args) -> int:
    path = Path(args.input)
    if not path.exists() or path.stat().st_size == 0:
        raise UsageError(f"input file {path} is missing or empty")
    window = tuple(args.window) if args.window else None

    if args.model in ("cosine", "sigmoid"):
        if path.suffix == ".json":
            trace = read_trace_json(path)
        else:
            trace = read_trace_csv(path)
        fit_fn = fit_cosine if args.model == "cosine" else fit_sigmoid
        result = fit_fn(trace, window=window, series=args.series)
    else:
        points = _load_xy_csv(path)
        result = fit_power_law(points, with_offset=args.model == "power-law-offset")

    result.diagnostics.update(
        {"input": str(path), "series": args.series, "requested_window":
         list(window) if window else None, "version": __version__}
    )
    out = _out_path(args.out) if args.out else path.with_suffix(".fit.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_fit(result, out)
    lifetime = "n/a" if result.lifetime is None else f"{result.lifetime:.6e}"
    print(f"model={result.model} lifetime={lifetime} params={result.params}")
    return 0


def cmd_table(args) -> int:
    scan = load_scan(args.scan_dir)
    rows = lifetime_table(scan, axis=args.axis, other_value=args.other_value)
    if not rows:
        raise UsageError(f"no resolved lifetimes along axis {args.axis!r}")
    out = _out_path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_lifetime_table(rows, out)
    print(f"wrote {len(rows)} rows to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="driven-ising",
        description="Floquet-driven Ising chain simulator and scan harness",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_lattice_flags(p):
        p.add_argument("--geometry", choices=GEOMETRIES, default="chain-boundary")
        p.add_argument("--L", type=int, required=True, help="number of spins")
        p.add_argument("--t1", type=float, default=1.0, help="interaction duration")
        p.add_argument("--J", type=float, default=1.0, help="Ising coupling")
        p.add_argument("--h", type=float, default=0.0, help="longitudinal field")
        p.add_argument("--eps", type=float, default=0.1, help="bulk drive deviation")
        p.add_argument("--eps-prime", type=float, default=1e-5, dest="eps_prime",
                       help="metronome drive deviation")

    p = sub.add_parser("simulate", help="evolve one configuration and store the trace")
    add_lattice_flags(p)
    p.add_argument("--initial", default="polarized", help="polarized or bitstrings:N")
    p.add_argument("--periods", type=float, default=1e10, help="max period index")
    p.add_argument("--grid", default="log:30", help="log:PPD or linear:STEP")
    p.add_argument("--even-only", action="store_true", dest="even_only")
    p.add_argument("--strategy", default="auto",
                   choices=("auto", "step", "binary-power", "spectral"))
    p.add_argument("--observables", nargs="*", default=None,
                   help="m_global, m_site:<i> (polarized) or Z:<i> (bitstrings)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True, help="output path prefix (.csv/.json)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="run a parameter scan from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="scan output directory")
    p.add_argument("--resume", action="store_true", default=True)
    p.add_argument("--no-resume", action="store_false", dest="resume")
    p.add_argument("--jobs", type=int, default=None, help="override config parallelism")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("spectrum", help="diagonalize an effective Hamiltonian")
    add_lattice_flags(p)
    p.add_argument("--effective", default="two-period",
                   choices=("one-period", "two-period", "magnus1", "bulk"))
    p.add_argument("--orientation", choices=("up", "down"), default="up",
                   help="frozen metronome orientation for the bulk Hamiltonian")
    p.add_argument("--no-parity", action="store_true", help="skip parity labels")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("fit", help="fit a stored trace or lifetime table")
    p.add_argument("--model", required=True,
                   choices=("cosine", "sigmoid", "power-law", "power-law-offset"))
    p.add_argument("--input", required=True, help="trace .json/.csv or x,lifetime .csv")
    p.add_argument("--series", default=None, help="series name inside the trace")
    p.add_argument("--window", type=float, nargs=2, default=None,
                   metavar=("LO", "HI"), help="fit window in periods")
    p.add_argument("--out", default=None, help="fit result JSON path")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("table", help="extract a lifetime table from a finished scan")
    p.add_argument("--scan-dir", required=True)
    p.add_argument("--axis", choices=("eps", "eps_prime"), default="eps_prime")
    p.add_argument("--other-value", type=float, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_table)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FitError as exc:
        print(f"fit failed: {exc} (reason: {exc.reason})", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
