"""Lattice/drive specification and interaction / effective Hamiltonians.

The drive cycle is: evolve under the Ising interaction for a time t1, then
rotate every site i around x by an angle pi*(1 - eps_i) (duration pi).  All
Hamiltonians here are built dense over the 2^L computational basis; `spin`
fixes the basis conventions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import spin

# Dense 2^L x 2^L matrices get built only up to this length (memory).
DENSE_MAX_L = 14

HERMITICITY_TOL = 1e-12

GEOMETRIES = ("chain-boundary", "chain-center", "external")

EFFECTIVE_KINDS = (
    "one-period-average",
    "two-period-average",
    "bulk",
    "first-order-magnus",
)


class GeometryError(ValueError):
    """Invalid geometry preset or incompatible chain length."""


@dataclass(frozen=True)
class FloquetParams:
    """Cycle timing: interaction for t1, then the fixed-duration pi drive."""

    t1: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.t1) and self.t1 > 0):
            raise ValueError(f"t1 must be positive and finite, got {self.t1}")

    @property
    def drive_duration(self) -> float:
        return math.pi

    @property
    def T(self) -> float:
        return self.t1 + math.pi


@dataclass(frozen=True)
class LatticeSpec:
    """Spin count, coupling graph, fields, and per-site drive deviations.

    `edges` holds (i, j, J_ij) with 1-based sites; `eps[i-1]` is the drive
    deviation of site i (rotation angle pi*(1 - eps_i)).
    """

    L: int
    edges: tuple[tuple[int, int, float], ...]
    h: tuple[float, ...]
    eps: tuple[float, ...]
    metronome_site: int | None = None
    geometry: str = "custom"

    def __post_init__(self):
        spin.check_length(self.L)
        object.__setattr__(
            self,
            "edges",
            tuple((int(i), int(j), float(J)) for i, j, J in self.edges),
        )
        object.__setattr__(self, "h", tuple(float(x) for x in self.h))
        object.__setattr__(self, "eps", tuple(float(x) for x in self.eps))
        if len(self.h) != self.L or len(self.eps) != self.L:
            raise ValueError("h and eps must have exactly one entry per site")
        seen = set()
        for i, j, _ in self.edges:
            if not (1 <= i <= self.L and 1 <= j <= self.L):
                raise ValueError(f"edge ({i},{j}) outside chain 1..{self.L}")
            if i == j:
                raise ValueError(f"self-edge at site {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
        for k, e in enumerate(self.eps):
            if not (0.0 <= e <= 1.0):
                raise ValueError(f"eps[{k}]={e} outside [0, 1]")
        if self.metronome_site is not None and not (1 <= self.metronome_site <= self.L):
            raise ValueError(f"metronome site {self.metronome_site} outside chain")

    @property
    def uniform_coupling(self) -> float | None:
        """Common J if all edges share one coupling, else None."""
        values = {J for _, _, J in self.edges}
        return values.pop() if len(values) == 1 else None


@dataclass(frozen=True)
class DisorderDistribution:
    """Uniform iid couplings/fields: J ~ U(J_range), h ~ U(h_range)."""

    J_range: tuple[float, float] = (0.5, 1.5)
    h_range: tuple[float, float] = (-1.0, 1.0)
    realizations: int = 250
    base_seed: int = 0

    def __post_init__(self):
        if self.J_range[0] > self.J_range[1] or self.h_range[0] > self.h_range[1]:
            raise ValueError("distribution intervals must satisfy low <= high")
        if self.realizations < 1:
            raise ValueError("realization count must be >= 1")


@dataclass(frozen=True)
class EffectiveHamiltonian:
    """Dense Hermitian generator of (approximate) stroboscopic evolution."""

    kind: str
    matrix: np.ndarray
    lattice: LatticeSpec
    params: FloquetParams

    def __post_init__(self):
        if self.kind not in EFFECTIVE_KINDS:
            raise ValueError(f"unknown effective-Hamiltonian kind {self.kind!r}")
        dev = np.abs(self.matrix - self.matrix.conj().T).max()
        if dev >= HERMITICITY_TOL:
            raise ValueError(f"matrix not Hermitian (max deviation {dev:.3e})")


def build_geometry(
    preset: str,
    L: int,
    J: float = 1.0,
    h: float | Sequence[float] = 0.0,
    eps: float = 0.1,
    eps_prime: float = 1e-5,
) -> LatticeSpec:
    """Construct one of the three studied layouts.

    chain-boundary: open chain 1..L, reduced deviation eps' on site 1.
    chain-center:   open chain, eps' on the central site floor((L+1)/2).
    external:       open chain over sites 1..L-1 plus site L coupled by a
                    single edge to the chain's central site floor(L/2),
                    with eps' on site L.
    """
    minimum = {"chain-boundary": 2, "chain-center": 3, "external": 4}
    if preset not in minimum:
        raise GeometryError(f"unknown geometry preset {preset!r}")
    spin.check_length(L)
    if L < minimum[preset]:
        raise GeometryError(f"{preset} needs L >= {minimum[preset]}, got {L}")
    for name, value in (("J", J), ("eps", eps), ("eps_prime", eps_prime)):
        if not np.isfinite(value):
            raise GeometryError(f"{name} must be finite, got {value}")

    if np.isscalar(h):
        fields = (float(h),) * L
    else:
        fields = tuple(float(x) for x in h)

    if preset == "external":
        edges = [(i, i + 1, float(J)) for i in range(1, L - 1)]
        edges.append((L // 2, L, float(J)))
        m = L
    else:
        edges = [(i, i + 1, float(J)) for i in range(1, L)]
        m = 1 if preset == "chain-boundary" else (L + 1) // 2

    deviations = [float(eps)] * L
    deviations[m - 1] = float(eps_prime)
    return LatticeSpec(
        L=L,
        edges=tuple(edges),
        h=fields,
        eps=tuple(deviations),
        metronome_site=m,
        geometry=preset,
    )


def realization_rng(base_seed: int, realization: int) -> np.random.Generator:
    """Independent, reproducible stream for one disorder realization."""
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=(realization,))
    return np.random.default_rng(seq)


def sample_disorder(
    spec: LatticeSpec, dist: DisorderDistribution, realization: int
) -> LatticeSpec:
    """Redraw couplings and fields for one realization; eps is untouched.

    Couplings are drawn in edge order, then fields in site order, from the
    stream derived from (base_seed, realization).
    """
    rng = realization_rng(dist.base_seed, realization)
    couplings = rng.uniform(dist.J_range[0], dist.J_range[1], size=len(spec.edges))
    fields = rng.uniform(dist.h_range[0], dist.h_range[1], size=spec.L)
    edges = tuple((i, j, float(Jr)) for (i, j, _), Jr in zip(spec.edges, couplings))
    return replace(spec, edges=edges, h=tuple(float(x) for x in fields))


def interaction_energy(index: int, spec: LatticeSpec) -> float:
    """Diagonal Ising energy sum_edges J z_i z_j / 4 + sum_i h_i z_i / 2."""
    energy = 0.0
    for i, j, J in spec.edges:
        energy += J * spin.spin_z(index, i) * spin.spin_z(index, j) / 4.0
    for i, hi in enumerate(spec.h, start=1):
        if hi != 0.0:
            energy += hi * spin.spin_z(index, i) / 2.0
    return energy


def interaction_energy_table(spec: LatticeSpec) -> np.ndarray:
    """Interaction energies for every basis index, shape (2^L,)."""
    z = [spin.spin_z_table(spec.L, i) for i in range(1, spec.L + 1)]
    energy = np.zeros(1 << spec.L)
    for i, j, J in spec.edges:
        energy += (J / 4.0) * z[i - 1] * z[j - 1]
    for i, hi in enumerate(spec.h, start=1):
        if hi != 0.0:
            energy += (hi / 2.0) * z[i - 1]
    return energy


def _check_dense(L: int):
    if L > DENSE_MAX_L:
        raise spin.ChainSizeError(
            f"dense 2^L x 2^L matrices are capped at L={DENSE_MAX_L}, got L={L}"
        )


def _add_sx_terms(H: np.ndarray, L: int, weights: Sequence[float]):
    """Add sum_i weights[i-1] * s_x^i in place (s_x element is 1/2)."""
    rows = np.arange(1 << L)
    for i, w in enumerate(weights, start=1):
        if w == 0.0:
            continue
        cols = rows ^ (1 << (i - 1))
        H[rows, cols] += w / 2.0


def one_period_average_hamiltonian(
    spec: LatticeSpec, params: FloquetParams
) -> EffectiveHamiltonian:
    """Plain one-cycle time average; keeps the large pi*(1-eps_i) rotations."""
    _check_dense(spec.L)
    T = params.T
    H = np.diag(params.t1 / T * interaction_energy_table(spec))
    _add_sx_terms(H, spec.L, [math.pi / T * (1.0 - e) for e in spec.eps])
    return EffectiveHamiltonian("one-period-average", H, spec, params)


def two_period_average_hamiltonian(
    spec: LatticeSpec, params: FloquetParams
) -> EffectiveHamiltonian:
    """Two-cycle average: transverse-field Ising form, fields averaged out.

    H = (1/T) [ t1 * sum_edges J s_z s_z  -  pi * sum_i eps_i s_x^i ].
    The near-pi spin flips cancel the longitudinal fields over two cycles,
    so `spec.h` does not enter.
    """
    _check_dense(spec.L)
    T = params.T
    coupling_only = replace(spec, h=(0.0,) * spec.L)
    H = np.diag(params.t1 / T * interaction_energy_table(coupling_only))
    _add_sx_terms(H, spec.L, [-math.pi / T * e for e in spec.eps])
    return EffectiveHamiltonian("two-period-average", H, spec, params)


def first_order_magnus(
    spec: LatticeSpec, params: FloquetParams
) -> EffectiveHamiltonian:
    """First correction to the one-period average.

    For the piecewise-constant cycle (H_int on [0, t1], then H_x) the nested
    commutator integral collapses to (pi * t1 / (2 T i)) [H_x, H_int].
    """
    _check_dense(spec.L)
    n = 1 << spec.L
    T = params.T
    Hx = np.zeros((n, n))
    _add_sx_terms(Hx, spec.L, [1.0 - e for e in spec.eps])
    E = interaction_energy_table(spec)
    comm = Hx * E[None, :] - E[:, None] * Hx  # [H_x, diag(E)], real antisymmetric
    H = -1j * (math.pi * params.t1 / (2.0 * T)) * comm
    return EffectiveHamiltonian("first-order-magnus", H, spec, params)


def bulk_effective_hamiltonian(
    spec: LatticeSpec,
    params: FloquetParams,
    metronome_up: bool = True,
    h_tilde: float | None = None,
) -> EffectiveHamiltonian:
    """Two-period average for sites 2..L with the metronome frozen.

    The boundary metronome (site 1) is replaced by a mean field on site 2:
    h_tilde = +- t1 * J_12 / 2, the sign following the frozen orientation.
    Passing h_tilde=0.0 recovers the plain two-period average on L-1 sites.
    """
    if spec.geometry != "chain-boundary" or spec.metronome_site != 1:
        raise GeometryError(
            "bulk reduction is defined for chain-boundary with metronome at site 1"
        )
    _check_dense(spec.L - 1)
    J12 = next(J for i, j, J in spec.edges if {i, j} == {1, 2})
    if h_tilde is None:
        h_tilde = (1.0 if metronome_up else -1.0) * params.t1 * J12 / 2.0

    reduced = LatticeSpec(
        L=spec.L - 1,
        edges=tuple(
            (i - 1, j - 1, J) for i, j, J in spec.edges if i != 1 and j != 1
        ),
        h=(0.0,) * (spec.L - 1),
        eps=spec.eps[1:],
        metronome_site=None,
        geometry="custom",
    )
    T = params.T
    H = np.diag(params.t1 / T * interaction_energy_table(reduced))
    # field term enters as h_tilde / T directly (t1 already inside h_tilde)
    H += np.diag(h_tilde / T * spin.spin_z_table(reduced.L, 1) / 2.0)
    _add_sx_terms(H, reduced.L, [-math.pi / T * e for e in reduced.eps])
    return EffectiveHamiltonian("bulk", H, reduced, params)


# ---------------------------------------------------------------------------
# Flat key = value serialization (one JSON-encoded value per line).

LATTICE_SCHEMA = "lattice/1"


def lattice_to_text(spec: LatticeSpec) -> str:
    eps_prime = (
        spec.eps[spec.metronome_site - 1] if spec.metronome_site is not None else None
    )
    lines = [f"# {LATTICE_SCHEMA}"]
    for key, value in (
        ("geometry", spec.geometry),
        ("L", spec.L),
        ("J", spec.uniform_coupling),
        ("h", list(spec.h)),
        ("epsilon", list(spec.eps)),
        ("epsilon_prime", eps_prime),
        ("metronome_site", spec.metronome_site),
        ("edges", [list(e) for e in spec.edges]),
    ):
        lines.append(f"{key} = {json.dumps(value)}")
    return "\n".join(lines) + "\n"


def parse_key_values(text: str) -> dict:
    """Parse the flat `key = json-value` format used for lattices and configs."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, payload = line.partition("=")
        try:
            values[key.strip()] = json.loads(payload.strip())
        except json.JSONDecodeError as exc:
            raise ValueError(f"line {lineno}: bad value for {key.strip()!r}: {exc}")
    return values


def lattice_from_text(text: str) -> LatticeSpec:
    values = parse_key_values(text)
    missing = {"geometry", "L", "h", "epsilon", "edges"} - set(values)
    if missing:
        raise ValueError(f"lattice document missing keys: {sorted(missing)}")
    return LatticeSpec(
        L=values["L"],
        edges=tuple(tuple(e) for e in values["edges"]),
        h=tuple(values["h"]),
        eps=tuple(values["epsilon"]),
        metronome_site=values.get("metronome_site"),
        geometry=values["geometry"],
    )
