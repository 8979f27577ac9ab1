"""Nonlinear least-squares fits for time traces and scan curves.

Three families cover everything the harness produces: cosine fits for slow
Rabi oscillations, sigmoid fits for disorder-averaged decays, and power
laws (optionally with offset) for lifetime-vs-deviation scans.  The solver
is a small damped Gauss-Newton (Levenberg-Marquardt) loop with analytic
Jacobians; parameter counts are tiny and the models are smooth, so nothing
heavier is warranted.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .observables import TimeTrace

FIT_SCHEMA = "fit/1"

# Lifetimes outside this window (in drive periods) cannot be resolved by
# the scan protocol and are excluded from scaling fits.
RESOLVABLE_WINDOW = (1e2, 1e10)


class FitError(RuntimeError):
    """Fit could not converge; `reason` says why."""

    def __init__(self, message: str, reason: str = "no-convergence"):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class FitModel:
    kind: str
    param_names: tuple[str, ...]
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    func: Callable
    jac: Callable


def _cosine(t, p):
    A, T_R = p
    return A * np.cos(2.0 * np.pi * t / T_R)


def _cosine_jac(t, p):
    A, T_R = p
    phase = 2.0 * np.pi * t / T_R
    return np.column_stack([np.cos(phase), A * np.sin(phase) * phase / T_R])


def _sigmoid(t, p):
    c, alpha = p
    return c * expit(-alpha * t)


def _sigmoid_jac(t, p):
    c, alpha = p
    s = expit(-alpha * t)
    return np.column_stack([s, -c * t * s * (1.0 - s)])


def _power_offset(x, p):
    a, beta, c = p
    return a * np.power(x, beta) + c


def _power_offset_jac(x, p):
    a, beta, c = p
    xb = np.power(x, beta)
    return np.column_stack([xb, a * xb * np.log(x), np.ones_like(x)])


INF = float("inf")

COSINE = FitModel("cosine", ("A", "T_R"), (0.0, 0.0), (INF, INF), _cosine, _cosine_jac)
SIGMOID = FitModel("sigmoid", ("c", "alpha"), (0.0, 0.0), (INF, INF), _sigmoid, _sigmoid_jac)
POWER_LAW = FitModel("power-law", ("a", "beta"), (0.0, -INF), (INF, INF), None, None)
POWER_LAW_OFFSET = FitModel(
    "power-law-with-offset",
    ("a", "beta", "c"),
    (0.0, -INF, -INF),
    (INF, INF, INF),
    _power_offset,
    _power_offset_jac,
)


@dataclass
class FitResult:
    model: str
    params: dict[str, float]
    sigmas: dict[str, float]
    residual: float
    window: tuple[float, float]
    lifetime: float | None
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _levenberg_marquardt(model: FitModel, t, y, p0, max_iter=200):
    """Damped Gauss-Newton on 0.5 * ||y - f(t, p)||^2 with box clipping."""
    lo = np.array(model.lower)
    hi = np.array(model.upper)
    p = np.clip(np.asarray(p0, dtype=float), lo, hi)
    # keep strictly inside open lower bounds (A, T_R, c, alpha must stay > 0)
    p = np.where((p <= lo) & (lo == 0.0), 1e-12, p)
    r = y - model.func(t, p)
    cost = float(r @ r)
    lam = 1e-3
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        J = model.jac(t, p)
        g = J.T @ r
        A = J.T @ J
        accepted = False
        for _ in range(40):
            damp = np.diag(np.maximum(np.diag(A), 1e-30))
            try:
                dp = np.linalg.solve(A + lam * damp, g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            p_try = np.clip(p + dp, lo, hi)
            p_try = np.where((p_try <= lo) & (lo == 0.0), 1e-12, p_try)
            r_try = y - model.func(t, p_try)
            cost_try = float(r_try @ r_try)
            if np.isfinite(cost_try) and cost_try <= cost:
                gain = cost - cost_try
                p, r, cost = p_try, r_try, cost_try
                lam = max(lam / 3.0, 1e-14)
                accepted = True
                break
            lam *= 10.0
            if lam > 1e14:
                break
        if not accepted:
            converged = cost < 1e-24 or float(np.abs(g).max()) < 1e-12
            break
        if gain <= 1e-14 * (cost + 1e-300):
            converged = True
            break
    else:
        converged = True  # ran out of iterations while still improving slowly

    J = model.jac(t, p)
    dof = max(len(y) - len(p), 1)
    sigma2 = cost / dof
    try:
        cov = sigma2 * np.linalg.inv(J.T @ J)
        sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    except np.linalg.LinAlgError:
        sigmas = np.full(len(p), np.nan)
    return p, sigmas, cost, converged, iterations


def _windowed(trace_or_xy, window, series):
    """Extract (t, y, window) from a TimeTrace or an (x, y) pair."""
    if isinstance(trace_or_xy, TimeTrace):
        names = list(trace_or_xy.series)
        if series is None:
            series = "m_global" if "m_global" in names else names[0]
        if series not in names:
            raise KeyError(f"trace has no series {series!r} (have {names})")
        t = trace_or_xy.grid.periods.astype(np.float64)
        y = trace_or_xy.series[series]
    else:
        t, y = trace_or_xy
        t = np.asarray(t, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
    if window is None:
        window = RESOLVABLE_WINDOW
    lo, hi = float(window[0]), float(window[1])
    mask = (t >= lo) & (t <= hi)
    if mask.sum() < 4:
        raise FitError(
            f"window [{lo:g}, {hi:g}] keeps only {int(mask.sum())} samples",
            reason="too-few-points",
        )
    return t[mask], y[mask], (lo, hi)


def _first_zero_crossing(t, y):
    sign0 = np.sign(y[0])
    if sign0 == 0:
        return None
    flipped = np.nonzero(np.sign(y) == -sign0)[0]
    return float(t[flipped[0]]) if len(flipped) else None


def _grid_search_period(t, y, candidates):
    best = None
    for T_R in candidates:
        c = np.cos(2.0 * np.pi * t / T_R)
        denom = float(c @ c)
        if denom <= 0:
            continue
        A = float(y @ c) / denom
        if A <= 0:
            continue
        sse = float(np.sum((y - A * c) ** 2))
        if best is None or sse < best[0]:
            best = (sse, A, T_R)
    return best


def fit_cosine(trace_or_xy, window=None, series=None) -> FitResult:
    """Fit A cos(2 pi t / T_R); lifetime is the fitted period T_R.

    The initial period guess comes from the first zero crossing of the
    windowed series (fallback: coarse log-spaced grid search).  To keep
    log-spaced late-time samples from aliasing the oscillation, the fit is
    restricted to a few Rabi periods past the window start; the window
    actually used is recorded on the result.
    """
    t, y, (lo, hi) = _windowed(trace_or_xy, window, series)
    span = t[-1] - t[0]

    t0 = _first_zero_crossing(t, y)
    if t0 is not None:
        seed_periods = 4.0 * t0 * np.logspace(-0.45, 0.45, 31)
    else:
        seed_periods = np.logspace(
            math.log10(max(4.0 * (t[1] - t[0]), 1e-6)), math.log10(8.0 * span), 60
        )
    best = _grid_search_period(t, y, seed_periods)
    if best is None:
        raise FitError("no admissible cosine seed found", reason="no-seed")
    _, A0, T_R0 = best

    if t0 is None and T_R0 > 2.0 * span:
        raise FitError(
            "window covers less than half a Rabi period", reason="period-beyond-window"
        )

    # refit on a sub-window covering the first few oscillation cycles
    sub = t <= t[0] + 3.0 * T_R0
    if sub.sum() >= 4:
        t_fit, y_fit = t[sub], y[sub]
    else:
        t_fit, y_fit = t, y
    p, sigmas, cost, converged, iters = _levenberg_marquardt(
        COSINE, t_fit, y_fit, (max(A0, 1e-12), T_R0)
    )
    if not converged:
        raise FitError("cosine fit did not converge", reason="no-convergence")
    A, T_R = p
    if T_R > 2.0 * span and t0 is None:
        raise FitError(
            "fitted period exceeds twice the observed span", reason="period-beyond-window"
        )
    return FitResult(
        model="cosine",
        params={"A": float(A), "T_R": float(T_R)},
        sigmas={"A": float(sigmas[0]), "T_R": float(sigmas[1])},
        residual=math.sqrt(cost),
        window=(float(t_fit[0]), float(t_fit[-1])),
        lifetime=float(T_R),
        converged=True,
        diagnostics={"iterations": iters, "seed_period": float(T_R0), "samples": int(len(t_fit))},
    )


def fit_sigmoid(trace_or_xy, window=None, series=None) -> FitResult:
    """Fit c / (1 + exp(alpha t)); lifetime is 1/alpha.

    1/alpha is where the curve has fallen to 1/(1+e) ~ 26.9% of c.
    """
    t, y, (lo, hi) = _windowed(trace_or_xy, window, series)
    head = float(np.mean(y[: max(3, len(y) // 20)]))
    tail = float(np.mean(y[-max(3, len(y) // 20):]))
    if not (head > 0 and head > tail + 0.02):
        raise FitError("series does not decay across the window", reason="no-decay")

    # f(0) = c/2 and f(1/alpha) ~ 0.54 * f(0): seed alpha from the halfway-ish point
    drop = np.nonzero(y < 0.54 * head)[0]
    if len(drop) == 0:
        raise FitError("decay not reached inside the window", reason="period-beyond-window")
    alpha0 = 1.0 / float(t[drop[0]])
    p, sigmas, cost, converged, iters = _levenberg_marquardt(
        SIGMOID, t, y, (2.0 * head, alpha0)
    )
    if not converged:
        raise FitError("sigmoid fit did not converge", reason="no-convergence")
    c, alpha = p
    if alpha <= 0:
        raise FitError("sigmoid rate collapsed to zero", reason="no-convergence")
    return FitResult(
        model="sigmoid",
        params={"c": float(c), "alpha": float(alpha)},
        sigmas={"c": float(sigmas[0]), "alpha": float(sigmas[1])},
        residual=math.sqrt(cost),
        window=(float(t[0]), float(t[-1])),
        lifetime=1.0 / float(alpha),
        converged=True,
        diagnostics={"iterations": iters, "seed_rate": alpha0},
    )


def fit_power_law(points, with_offset: bool = False, resolvable=RESOLVABLE_WINDOW) -> FitResult:
    """Fit lifetime-vs-parameter points with a x^beta (+ c).

    Points whose lifetime falls outside the resolvable window are dropped
    before fitting; at least 3 admissible points are required.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be (x, lifetime) pairs")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0):
        raise FitError("x values must be positive", reason="bad-input")
    keep = (y > 0) & (y >= resolvable[0]) & (y <= resolvable[1])
    x, y = x[keep], y[keep]
    excluded = int(len(pts) - keep.sum())
    if len(x) < 3:
        raise FitError(
            f"only {len(x)} admissible points after exclusion", reason="too-few-points"
        )

    # log-log regression; exact for pure power laws, else the offset seed
    slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
    a0, beta0 = math.exp(intercept), float(slope)

    def _profiled_offset_seed():
        # for fixed beta the model is linear in (a, c); scan beta and keep
        # the best linear solution as an alternative starting point
        best = None
        for beta in np.linspace(-16.0, 4.0, 201):
            design = np.column_stack([np.power(x, beta), np.ones_like(x)])
            coef, *_ = np.linalg.lstsq(design, y, rcond=None)
            if coef[0] <= 0:
                continue
            resid = y - design @ coef
            sse = float(resid @ resid)
            if best is None or sse < best[0]:
                best = (sse, (float(coef[0]), float(beta), float(coef[1])))
        return best[1] if best is not None else None

    if not with_offset:
        lx = np.log(x)
        resid = np.log(y) - (slope * lx + intercept)
        dof = max(len(x) - 2, 1)
        s2 = float(resid @ resid) / dof
        lxc = lx - lx.mean()
        var_slope = s2 / float(lxc @ lxc)
        var_inter = s2 * (1.0 / len(x) + lx.mean() ** 2 / float(lxc @ lxc))
        return FitResult(
            model="power-law",
            params={"a": a0, "beta": beta0},
            sigmas={"a": a0 * math.sqrt(var_inter), "beta": math.sqrt(var_slope)},
            residual=math.sqrt(float(resid @ resid)),
            window=(float(x.min()), float(x.max())),
            lifetime=None,
            converged=True,
            diagnostics={"excluded_points": excluded, "space": "log-log"},
        )

    p0 = (a0, beta0, float(y.min()) / 2.0)
    p, sigmas, cost, converged, iters = _levenberg_marquardt(POWER_LAW_OFFSET, x, y, p0)
    alt = _profiled_offset_seed()
    if alt is not None:
        p2, sig2, cost2, conv2, it2 = _levenberg_marquardt(POWER_LAW_OFFSET, x, y, alt)
        if conv2 and cost2 < cost:
            p, sigmas, cost, converged, iters = p2, sig2, cost2, conv2, it2
    if not converged:
        raise FitError("power-law-with-offset fit did not converge")
    return FitResult(
        model="power-law-with-offset",
        params={"a": float(p[0]), "beta": float(p[1]), "c": float(p[2])},
        sigmas={
            "a": float(sigmas[0]),
            "beta": float(sigmas[1]),
            "c": float(sigmas[2]),
        },
        residual=math.sqrt(cost),
        window=(float(x.min()), float(x.max())),
        lifetime=None,
        converged=True,
        diagnostics={"excluded_points": excluded, "iterations": iters},
    )


def fit_to_json(result: FitResult) -> dict:
    return {
        "schema": FIT_SCHEMA,
        "model": result.model,
        "params": result.params,
        "sigmas": result.sigmas,
        "residual": result.residual,
        "window": list(result.window),
        "lifetime": result.lifetime,
        "converged": result.converged,
        "diagnostics": result.diagnostics,
    }


def fit_from_json(doc: dict) -> FitResult:
    if doc.get("schema") != FIT_SCHEMA:
        raise ValueError(f"not a {FIT_SCHEMA} document")
    return FitResult(
        model=doc["model"],
        params=doc["params"],
        sigmas=doc["sigmas"],
        residual=doc["residual"],
        window=tuple(doc["window"]),
        lifetime=doc["lifetime"],
        converged=doc["converged"],
        diagnostics=doc.get("diagnostics", {}),
    )


def write_fit(result: FitResult, path):
    with open(path, "w") as f:
        json.dump(fit_to_json(result), f, indent=1)
        f.write("\n")
