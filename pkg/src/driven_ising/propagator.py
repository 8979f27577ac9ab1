"""Floquet cycle operator and long-horizon stroboscopic evolution.

One cycle applies the diagonal interaction phases first, then the per-site
x rotations (angle pi*(1 - eps_i)).  Three evolution strategies cover the
horizon range: explicit stepping, binary powering of the dense cycle
operator, and spectral decomposition (one diagonalization, any period
index afterwards at matrix-vector cost).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from . import spin
from .model import DENSE_MAX_L, EffectiveHamiltonian, FloquetParams, LatticeSpec
from .model import interaction_energy_table

MAX_PERIOD_INDEX = 10**12

# Squared powers get re-unitarized once their unitarity drift passes this.
POWER_DRIFT_TOL = 1e-9

SPECTRAL_RESIDUAL_TOL = 1e-8

STRATEGIES = ("step", "binary-power", "spectral")


class PropagatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing stroboscopic period indices n (times t = n T)."""

    periods: np.ndarray
    even_only: bool = False
    points_per_decade: int | None = None

    def __post_init__(self):
        n = np.asarray(self.periods, dtype=np.int64)
        object.__setattr__(self, "periods", n)
        if n.ndim != 1 or len(n) == 0:
            raise ValueError("grid must be a non-empty 1-d list of periods")
        if n[0] < 0 or np.any(np.diff(n) <= 0):
            raise ValueError("period indices must be non-negative and strictly increasing")
        if n[-1] > MAX_PERIOD_INDEX:
            raise ValueError(f"period index {n[-1]} exceeds cap {MAX_PERIOD_INDEX}")
        if self.even_only and np.any(n % 2 != 0):
            raise ValueError("even-only grid contains odd period indices")

    def __len__(self):
        return len(self.periods)


def linear_grid(start: int, stop: int, step: int = 1, even_only: bool = False) -> TimeGrid:
    return TimeGrid(np.arange(start, stop + 1, step, dtype=np.int64), even_only=even_only)


def log_grid(
    max_periods: float,
    points_per_decade: int = 30,
    even_only: bool = True,
    linear_prefix: int = 200,
    min_period: int = 2,
) -> TimeGrid:
    """Log-spaced grid with a dense linear prefix for the initial decay.

    Defaults follow the probing scheme used throughout: even periods only,
    30 points per decade, linear prefix n = 2, 4, ..., 200.
    """
    n_max = int(max_periods)
    step = 2 if even_only else 1
    prefix_top = min(linear_prefix, n_max)
    points = list(range(min_period, prefix_top + 1, step))
    if n_max > prefix_top:
        decades = math.log10(n_max / prefix_top)
        count = max(2, int(round(decades * points_per_decade)))
        raw = np.logspace(math.log10(prefix_top), math.log10(n_max), count + 1)
        for x in raw:
            n = int(round(x / step)) * step
            if n > points[-1]:
                points.append(n)
    tail = n_max if (not even_only or n_max % 2 == 0) else n_max - 1
    if tail > points[-1]:
        points.append(tail)
    return TimeGrid(
        np.array(points, dtype=np.int64),
        even_only=even_only,
        points_per_decade=points_per_decade,
    )


@dataclass(frozen=True)
class PropagatorBundle:
    """Factored one-cycle operator, with optional dense and spectral forms."""

    lattice: LatticeSpec
    params: FloquetParams
    interaction_phases: np.ndarray  # (2^L,) exp(-i E(b) t1)
    thetas: np.ndarray              # (L,) rotation angle per site, pi*(1-eps_i)
    dense: np.ndarray | None = None
    eigenphases: np.ndarray | None = None
    eigenvectors: np.ndarray | None = None

    @property
    def L(self) -> int:
        return self.lattice.L


def _apply_x_rotations(block: np.ndarray, thetas: np.ndarray, L: int) -> np.ndarray:
    """Apply per-site R_x(theta) = cos(t/2) I - i sin(t/2) sigma_x in place.

    `block` is (2^L,) or (2^L, m); pairwise mixing along the basis axis
    costs O(L 2^L m).
    """
    m = 1 if block.ndim == 1 else block.shape[1]
    for site in range(1, L + 1):
        theta = thetas[site - 1]
        if theta == 0.0:
            continue
        c = math.cos(theta / 2.0)
        s = -1j * math.sin(theta / 2.0)
        view = block.reshape(-1, 2, (1 << (site - 1)) * m)
        a = view[:, 0, :].copy()
        b = view[:, 1, :]
        view[:, 0, :] = c * a + s * b
        view[:, 1, :] = s * a + c * b
    return block


def build_bundle(
    spec: LatticeSpec,
    params: FloquetParams,
    dense: bool = False,
    spectral: bool = False,
) -> PropagatorBundle:
    """Assemble the cycle operator U = (prod_i R_x(theta_i)) diag(phases)."""
    phases = np.exp(-1j * interaction_energy_table(spec) * params.t1)
    thetas = np.array([math.pi * (1.0 - e) for e in spec.eps])
    bundle = PropagatorBundle(spec, params, phases, thetas)
    if dense or spectral:
        if spec.L > DENSE_MAX_L:
            raise spin.ChainSizeError(
                f"dense/spectral forms are capped at L={DENSE_MAX_L}, got {spec.L}"
            )
        U = np.diag(phases.astype(np.complex128))
        _apply_x_rotations(U, thetas, spec.L)
        bundle = replace(bundle, dense=U)
    if spectral:
        bundle = diagonalize_unitary(bundle)
    return bundle


def floquet_step(state: np.ndarray, bundle: PropagatorBundle) -> np.ndarray:
    """One cycle: interaction phases, then the per-site x rotations."""
    if len(state) != len(bundle.interaction_phases):
        raise ValueError("state length does not match bundle dimension")
    out = state * bundle.interaction_phases
    return _apply_x_rotations(out, bundle.thetas, bundle.L)


def diagonalize_unitary(bundle: PropagatorBundle) -> PropagatorBundle:
    """Eigenphases and unitary eigenvectors of the dense cycle operator.

    U is normal, so its complex Schur form is diagonal; the Schur vectors
    are orthonormal by construction even across the near-degenerate pairs
    this model produces.
    """
    if bundle.dense is None:
        raise PropagatorError("diagonalize_unitary needs the dense form")
    T, Q = scipy.linalg.schur(bundle.dense, output="complex")
    lam = np.diag(T)
    residual = np.abs(bundle.dense - (Q * lam[None, :]) @ Q.conj().T).max()
    if residual > SPECTRAL_RESIDUAL_TOL:
        raise PropagatorError(
            f"unitary diagonalization residual {residual:.3e} exceeds "
            f"{SPECTRAL_RESIDUAL_TOL:.1e}"
        )
    return replace(bundle, eigenphases=np.angle(lam), eigenvectors=Q)


def default_strategy(L: int) -> str:
    if L <= 12:
        return "spectral"
    if L <= DENSE_MAX_L:
        return "binary-power"
    return "step"


def _binary_powers(U: np.ndarray, max_exponent: int) -> list[np.ndarray]:
    """U^(2^j) for j = 0..max_exponent by repeated squaring.

    Each stored power is checked for unitarity drift and re-unitarized
    through its polar factor when the drift passes POWER_DRIFT_TOL.
    """
    powers = [U]
    for _ in range(max_exponent):
        nxt = powers[-1] @ powers[-1]
        drift = np.abs(nxt.conj().T @ nxt - np.eye(len(nxt))).max()
        if drift > POWER_DRIFT_TOL:
            W, _, Vh = np.linalg.svd(nxt)
            nxt = W @ Vh
        powers.append(nxt)
    return powers


def evolve_on_grid(
    state: np.ndarray,
    bundle: PropagatorBundle,
    grid: TimeGrid,
    strategy: str = "auto",
    observer: Callable[[np.ndarray], object] | None = None,
):
    """Sample U^n |state> at every n in the grid.

    Returns the stacked observer outputs, or the stacked states when no
    observer is given.
    """
    if strategy == "auto":
        strategy = default_strategy(bundle.L)
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    periods = grid.periods
    record = (lambda psi: psi.copy()) if observer is None else observer
    out = []

    if strategy == "step":
        psi = state.astype(np.complex128).copy()
        current = 0
        for n in periods:
            for _ in range(n - current):
                psi = floquet_step(psi, bundle)
            current = int(n)
            out.append(record(psi))
    elif strategy == "binary-power":
        if bundle.dense is None:
            raise PropagatorError("binary-power strategy needs the dense form")
        max_exp = int(periods[-1]).bit_length() - 1 if periods[-1] > 0 else 0
        powers = _binary_powers(bundle.dense, max_exp)
        for n in periods:
            psi = state.astype(np.complex128).copy()
            j = 0
            n = int(n)
            while n:
                if n & 1:
                    psi = powers[j] @ psi
                n >>= 1
                j += 1
            out.append(record(psi))
    else:  # spectral
        if bundle.eigenvectors is None:
            raise PropagatorError("spectral strategy needs the spectral form")
        V = bundle.eigenvectors
        w = V.conj().T @ state
        for n in periods:
            if n == 0:
                psi = state.astype(np.complex128).copy()
            else:
                psi = V @ (np.exp(1j * bundle.eigenphases * int(n)) * w)
            out.append(record(psi))
    return np.array(out)


def effective_evolve(
    state: np.ndarray,
    H_eff: EffectiveHamiltonian,
    times: Sequence[float],
    observer: Callable[[np.ndarray], object] | None = None,
):
    """exp(-i H t) |state> at the given physical times, via one eigh."""
    energies, V = np.linalg.eigh(H_eff.matrix)
    w = V.conj().T @ state
    record = (lambda psi: psi.copy()) if observer is None else observer
    out = []
    for t in times:
        psi = V @ (np.exp(-1j * energies * t) * w)
        out.append(record(psi))
    return np.array(out)
