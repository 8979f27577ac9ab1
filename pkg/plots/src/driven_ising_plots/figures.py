"""Figure rendering for driven-ising result files.

Four figure kinds, one per script: log-time magnetization traces, the
lifetime heatmap over (eps, eps'), the two power-law cuts through that
heatmap, and autocorrelator panels.  Rendering is deterministic (fixed
figure geometry, no randomness) and never recomputes physics — inputs are
read through the schema parsers only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .schemas import SchemaError, parse_fit_json, parse_scan_dir, parse_trace_csv

FIGURE_KINDS = (
    "trace-logtime",
    "lifetime-heatmap",
    "heatmap-cuts",
    "autocorrelator-panels",
)

FIGSIZE = (7.0, 4.4)
DPI = 150

# color reserved for cells whose lifetime cannot be resolved
MASK_COLOR = "#cccccc"


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    labels: list = field(default_factory=list)
    right_axis_series: str | None = None  # metronome series on a second axis
    fit_overlays: list = field(default_factory=list)  # fit JSONs for the cut panels
    title: str | None = None

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"unknown figure kind {self.kind!r}")
        if not self.inputs:
            raise ValueError("figure needs at least one input file")


def _label(spec: FigureSpec, k: int, default: str) -> str:
    return spec.labels[k] if k < len(spec.labels) else default


def _save(fig, spec: FigureSpec):
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, dpi=DPI)
    plt.close(fig)
    return out


def render_trace_logtime(spec: FigureSpec):
    """Global magnetization on a log period axis, metronome on a red right axis."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    right = None
    for k, input_path in enumerate(spec.inputs):
        table = parse_trace_csv(input_path)
        if "m_global" not in table.series:
            raise SchemaError(input_path, "m_global", "trace-logtime needs a global series")
        periods, values = table.values("m_global")
        positive = np.array(periods) > 0
        ax.plot(
            np.array(periods)[positive],
            np.array(values)[positive],
            label=_label(spec, k, Path(input_path).stem),
        )
        metronome = spec.right_axis_series or next(
            (s for s in table.series if s.startswith("m_site_")), None
        )
        if metronome and metronome in table.series and right is None:
            right = ax.twinx()
            _, mvalues = table.values(metronome)
            right.plot(
                np.array(periods)[positive], np.array(mvalues)[positive],
                color="tab:red", linestyle="--", linewidth=1.0,
            )
            right.set_ylabel(metronome.replace("m_site_", "metronome site "), color="tab:red")
            right.tick_params(axis="y", labelcolor="tab:red")
            right.set_ylim(-1.05, 1.05)
    ax.set_xscale("log")
    ax.set_xlabel("period n")
    ax.set_ylabel("global magnetization")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="lower left", fontsize=8)
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return _save(fig, spec)


def render_lifetime_heatmap(spec: FigureSpec):
    """log10 lifetime over the (eps, eps') grid; unresolved cells masked."""
    grid = parse_scan_dir(spec.inputs[0])
    surface = np.full((len(grid.eps), len(grid.eps_prime)), np.nan)
    for i in range(len(grid.eps)):
        for j in range(len(grid.eps_prime)):
            if grid.lifetime[i][j] is not None:
                surface[i][j] = np.log10(grid.lifetime[i][j])

    fig, ax = plt.subplots(figsize=FIGSIZE)
    masked = np.ma.masked_invalid(surface)
    cmap = matplotlib.colormaps["viridis"].copy()
    cmap.set_bad(MASK_COLOR)
    mesh = ax.pcolormesh(
        np.arange(len(grid.eps_prime) + 1), np.arange(len(grid.eps) + 1), masked, cmap=cmap
    )
    ax.set_xticks(np.arange(len(grid.eps_prime)) + 0.5)
    ax.set_xticklabels([f"{x:g}" for x in grid.eps_prime], rotation=45, fontsize=8)
    ax.set_yticks(np.arange(len(grid.eps)) + 0.5)
    ax.set_yticklabels([f"{x:g}" for x in grid.eps], fontsize=8)
    ax.set_xlabel("eps'")
    ax.set_ylabel("eps")
    fig.colorbar(mesh, ax=ax, label="log10 lifetime [periods]")
    if spec.title:
        ax.set_title(spec.title)
    fig.tight_layout()
    return _save(fig, spec)


def render_heatmap_cuts(spec: FigureSpec):
    """Fixed-eps' and fixed-eps cuts with optional power-law overlays."""
    grid = parse_scan_dir(spec.inputs[0])
    fig, (left, right) = plt.subplots(1, 2, figsize=FIGSIZE)

    j_cut = 0  # first eps' column: lifetime vs eps
    xs = [grid.eps[i] for i in range(len(grid.eps)) if grid.lifetime[i][j_cut] is not None]
    ys = [grid.lifetime[i][j_cut] for i in range(len(grid.eps)) if grid.lifetime[i][j_cut] is not None]
    left.loglog(xs, ys, "o", label=f"eps' = {grid.eps_prime[j_cut]:g}")
    left.set_xlabel("eps")
    left.set_ylabel("lifetime [periods]")

    i_cut = 0  # first eps row: lifetime vs eps'
    xs2 = [grid.eps_prime[j] for j in range(len(grid.eps_prime)) if grid.lifetime[i_cut][j] is not None]
    ys2 = [grid.lifetime[i_cut][j] for j in range(len(grid.eps_prime)) if grid.lifetime[i_cut][j] is not None]
    right.loglog(xs2, ys2, "s", color="tab:red", label=f"eps = {grid.eps[i_cut]:g}")
    right.set_xlabel("eps'")

    for axis, data_x, fit_path in zip((left, right), (xs, xs2), spec.fit_overlays[:2]):
        if not fit_path or not data_x:
            continue
        fit = parse_fit_json(fit_path)
        params = fit["params"]
        sampled = np.logspace(np.log10(min(data_x)), np.log10(max(data_x)), 60)
        curve = params["a"] * sampled ** params["beta"] + params.get("c", 0.0)
        label = f"fit beta = {params['beta']:.2f}"
        axis.loglog(sampled, curve, "-", color="k", linewidth=1.0, label=label)

    left.legend(fontsize=8)
    right.legend(fontsize=8)
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, spec)


def render_autocorrelator_panels(spec: FigureSpec):
    """One panel per autocorrelator series (Z_i), log period axis."""
    tables = [parse_trace_csv(p) for p in spec.inputs]
    names = [s for s in tables[0].series if s.startswith("Z_")]
    if not names:
        raise SchemaError(spec.inputs[0], "Z_*", "no autocorrelator series found")
    fig, axes = plt.subplots(len(names), 1, figsize=(FIGSIZE[0], 1.9 * len(names)), sharex=True)
    if len(names) == 1:
        axes = [axes]
    for ax, name in zip(axes, names):
        for k, table in enumerate(tables):
            if name not in table.series:
                raise SchemaError(spec.inputs[k], name, "series missing from input")
            periods, values = table.values(name)
            positive = np.array(periods) > 0
            ax.plot(
                np.array(periods)[positive], np.array(values)[positive],
                label=_label(spec, k, Path(spec.inputs[k]).stem),
            )
        ax.set_xscale("log")
        ax.set_ylabel(name)
        ax.set_ylim(-1.05, 1.05)
        ax.axhline(0.0, color="gray", linewidth=0.5)
    axes[-1].set_xlabel("period n")
    axes[0].legend(fontsize=8, loc="lower left")
    if spec.title:
        fig.suptitle(spec.title)
    fig.tight_layout()
    return _save(fig, spec)


RENDERERS = {
    "trace-logtime": render_trace_logtime,
    "lifetime-heatmap": render_lifetime_heatmap,
    "heatmap-cuts": render_heatmap_cuts,
    "autocorrelator-panels": render_autocorrelator_panels,
}


def render(spec: FigureSpec):
    """Dispatch to the figure kind's renderer; returns the output path."""
    return RENDERERS[spec.kind](spec)
