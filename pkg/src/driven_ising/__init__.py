"""Exact simulator and experiment harness for periodically driven spin-1/2
Ising chains with spatially nonuniform drive deviations."""

from ._version import __version__

from .model import (
    DisorderDistribution,
    EffectiveHamiltonian,
    FloquetParams,
    LatticeSpec,
    build_geometry,
    bulk_effective_hamiltonian,
    first_order_magnus,
    interaction_energy,
    one_period_average_hamiltonian,
    sample_disorder,
    two_period_average_hamiltonian,
)
from .propagator import (
    PropagatorBundle,
    TimeGrid,
    build_bundle,
    diagonalize_unitary,
    effective_evolve,
    evolve_on_grid,
    floquet_step,
    linear_grid,
    log_grid,
)
from .observables import (
    BitstringSampler,
    SpectrumReport,
    TimeTrace,
    autocorrelator_trace,
    ensemble_average,
    global_magnetization,
    magnetization_trace,
    site_magnetization,
    spectrum_report,
)
from .fitting import FitError, FitResult, fit_cosine, fit_power_law, fit_sigmoid
from .experiments import PointResult, ScanResult, ScanSpec, disorder_average, run_point, run_scan
from . import spin

__all__ = [
    "__version__",
    "DisorderDistribution",
    "EffectiveHamiltonian",
    "FloquetParams",
    "LatticeSpec",
    "build_geometry",
    "bulk_effective_hamiltonian",
    "first_order_magnus",
    "interaction_energy",
    "one_period_average_hamiltonian",
    "sample_disorder",
    "two_period_average_hamiltonian",
    "PropagatorBundle",
    "TimeGrid",
    "build_bundle",
    "diagonalize_unitary",
    "effective_evolve",
    "evolve_on_grid",
    "floquet_step",
    "linear_grid",
    "log_grid",
    "BitstringSampler",
    "SpectrumReport",
    "TimeTrace",
    "autocorrelator_trace",
    "ensemble_average",
    "global_magnetization",
    "magnetization_trace",
    "site_magnetization",
    "spectrum_report",
    "FitError",
    "FitResult",
    "fit_cosine",
    "fit_power_law",
    "fit_sigmoid",
    "PointResult",
    "ScanResult",
    "ScanSpec",
    "disorder_average",
    "run_point",
    "run_scan",
    "spin",
]
