"""Computational-basis conventions and elementary operations for spin-1/2 chains.

Sites are labeled 1..L.  Site i is stored on bit i-1 of the basis index:
bit value 0 means spin-up (sigma_z = +1), bit value 1 means spin-down
(sigma_z = -1).  Every module in this package relies on this one mapping.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

# State vectors are plain 2^L complex arrays.  Beyond this length the
# amplitude vector itself gets unwieldy; dense 2^L x 2^L matrices have a
# stricter cap (model.DENSE_MAX_L).
MAX_STATE_L = 20

NORM_TOL = 1e-10


class ChainSizeError(ValueError):
    """Requested chain length outside the supported range."""


def check_length(L: int) -> int:
    if not isinstance(L, (int, np.integer)) or L < 1 or L > MAX_STATE_L:
        raise ChainSizeError(f"chain length must be in [1, {MAX_STATE_L}], got {L!r}")
    return int(L)


def basis_size(L: int) -> int:
    return 1 << check_length(L)


def num_sites(state: np.ndarray) -> int:
    """Recover L from a state vector's length."""
    n = len(state)
    L = n.bit_length() - 1
    if n != 1 << L:
        raise ValueError(f"state length {n} is not a power of two")
    return L


def spin_z(index: int, site: int) -> int:
    """sigma_z eigenvalue (+1/-1) of 1-based `site` in basis state `index`."""
    return 1 - 2 * ((int(index) >> (site - 1)) & 1)


def spin_z_table(L: int, site: int) -> np.ndarray:
    """sigma_z eigenvalues of `site` across the whole basis, as a float array."""
    check_length(L)
    if not 1 <= site <= L:
        raise ValueError(f"site {site} outside chain 1..{L}")
    b = np.arange(1 << L, dtype=np.int64)
    return (1 - 2 * ((b >> (site - 1)) & 1)).astype(np.float64)


def total_z_table(L: int) -> np.ndarray:
    """Sum of sigma_z eigenvalues over all sites, per basis index."""
    check_length(L)
    b = np.arange(1 << L, dtype=np.int64)
    down = np.bitwise_count(b).astype(np.int64)  # set bits = down spins
    return (L - 2 * down).astype(np.float64)


def make_polarized_state(L: int) -> np.ndarray:
    """|up...up>: amplitude 1 on basis index 0."""
    psi = np.zeros(basis_size(L), dtype=np.complex128)
    psi[0] = 1.0
    return psi


def bitstring_index(bits: Sequence[int]) -> int:
    """Basis index of a product state; bits[i] is site i+1, 0=up, 1=down."""
    index = 0
    for pos, b in enumerate(bits):
        if b not in (0, 1):
            raise ValueError(f"bit values must be 0 (up) or 1 (down), got {b!r}")
        index |= int(b) << pos
    return index


def make_bitstring_state(bits: Sequence[int]) -> np.ndarray:
    """Product state |b_1 ... b_L> with bits[i]=0 meaning up at site i+1."""
    L = check_length(len(bits))
    psi = np.zeros(1 << L, dtype=np.complex128)
    psi[bitstring_index(bits)] = 1.0
    return psi


def sample_random_bitstring(L: int, rng: np.random.Generator) -> np.ndarray:
    """Each site independently up/down with probability 1/2."""
    check_length(L)
    return rng.integers(0, 2, size=L).astype(np.int64)


def global_spin_flip(state: np.ndarray) -> np.ndarray:
    """Flip every spin: amplitude at index k moves to (2^L - 1) XOR k.

    With the bit convention this is exactly a reversal of the amplitude
    vector, so the operation is an involution by construction.
    """
    num_sites(state)  # validates power-of-two length
    return state[::-1].copy()


def parity_expectation(state: np.ndarray) -> float:
    """<state| P |state> for the global spin-flip operator P."""
    return float(np.real(np.vdot(state, global_spin_flip(state))))


def domain_wall_number(index: int, L: int) -> int:
    """Number of adjacent anti-aligned pairs along the open chain 1..L."""
    check_length(L)
    index = int(index)
    return int(bin((index ^ (index >> 1)) & ((1 << (L - 1)) - 1)).count("1"))


def domain_wall_table(L: int) -> np.ndarray:
    """Domain-wall count for every basis index, shape (2^L,)."""
    check_length(L)
    b = np.arange(1 << L, dtype=np.int64)
    walls = np.bitwise_count((b ^ (b >> 1)) & ((1 << (L - 1)) - 1))
    return walls.astype(np.int64)
