"""Command-line entry points, one per figure kind."""

from __future__ import annotations

import argparse
import sys

from .figures import FigureSpec, render
from .schemas import SchemaError


def _run(spec_builder, argv):
    try:
        spec = spec_builder(argv)
        out = render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"render failed: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def main_trace_logtime(argv=None) -> int:
    def build(argv):
        p = argparse.ArgumentParser(
            prog="plot-trace-logtime",
            description="log-time magnetization traces with a metronome right axis",
        )
        p.add_argument("traces", nargs="+", help="trace CSV files")
        p.add_argument("--labels", nargs="*", default=[])
        p.add_argument("--right-axis", default=None, help="series for the right axis")
        p.add_argument("--title", default=None)
        p.add_argument("--out", required=True)
        a = p.parse_args(argv)
        return FigureSpec(
            "trace-logtime", a.traces, a.out, labels=a.labels,
            right_axis_series=a.right_axis, title=a.title,
        )

    return _run(build, argv)


def main_lifetime_heatmap(argv=None) -> int:
    def build(argv):
        p = argparse.ArgumentParser(
            prog="plot-lifetime-heatmap",
            description="lifetime surface over (eps, eps'); unresolved cells masked",
        )
        p.add_argument("scan_dir", help="finished scan directory")
        p.add_argument("--title", default=None)
        p.add_argument("--out", required=True)
        a = p.parse_args(argv)
        return FigureSpec("lifetime-heatmap", [a.scan_dir], a.out, title=a.title)

    return _run(build, argv)


def main_heatmap_cuts(argv=None) -> int:
    def build(argv):
        p = argparse.ArgumentParser(
            prog="plot-heatmap-cuts",
            description="fixed-eps' and fixed-eps lifetime cuts with fit overlays",
        )
        p.add_argument("scan_dir")
        p.add_argument("--fit-eps", default=None, help="fit JSON for the eps cut")
        p.add_argument("--fit-eps-prime", default=None, help="fit JSON for the eps' cut")
        p.add_argument("--title", default=None)
        p.add_argument("--out", required=True)
        a = p.parse_args(argv)
        return FigureSpec(
            "heatmap-cuts", [a.scan_dir], a.out,
            fit_overlays=[a.fit_eps, a.fit_eps_prime], title=a.title,
        )

    return _run(build, argv)


def main_autocorrelator_panels(argv=None) -> int:
    def build(argv):
        p = argparse.ArgumentParser(
            prog="plot-autocorrelator-panels",
            description="autocorrelator panels (one per site) from ensemble traces",
        )
        p.add_argument("traces", nargs="+", help="ensemble trace CSV files")
        p.add_argument("--labels", nargs="*", default=[])
        p.add_argument("--title", default=None)
        p.add_argument("--out", required=True)
        a = p.parse_args(argv)
        return FigureSpec(
            "autocorrelator-panels", a.traces, a.out, labels=a.labels, title=a.title
        )

    return _run(build, argv)
