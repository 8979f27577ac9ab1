"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and measured values.  All physics runs at desk scale (L <= 10) with
the package default t1 = 1.0 unless a criterion pins it explicitly.

The gap-scaling-in-eps criterion is implemented exactly as stated and is
expected to FAIL: at t1 = 1 the transverse-to-Ising ratio 2*pi*eps/(t1*J)
lies in [0.31, 1.26] over the prescribed eps window, outside the
perturbative regime where the splitting follows eps^L.  The companion
check in test_model.py verifies the eps^L law in the perturbative regime.
"""

from pathlib import Path

import numpy as np
from scipy.special import expit

from driven_ising import spin
from driven_ising.experiments import (
    STATUS_OK,
    ScanSpec,
    disorder_average,
    run_point,
    run_scan,
)
from driven_ising.fitting import fit_cosine, fit_power_law, fit_sigmoid
from driven_ising.model import (
    DisorderDistribution,
    FloquetParams,
    build_geometry,
    two_period_average_hamiltonian,
)
from driven_ising.observables import (
    BitstringSampler,
    autocorrelator_trace,
    ensemble_average,
    magnetization_observer,
    spectrum_report,
)
from driven_ising.propagator import (
    TimeGrid,
    _binary_powers,
    build_bundle,
    effective_evolve,
    evolve_on_grid,
    floquet_step,
    log_grid,
)

PARAMS = FloquetParams(t1=1.0)


def report(criterion: str, ok: bool, detail: str):
    print(f"[ACCEPTANCE] {'PASS' if ok else 'FAIL'} {criterion}: {detail}")


# -------------------------------------------------------------------- 1


def test_criterion_01_period_doubling():
    spec = build_geometry("chain-boundary", 6, eps=0.0, eps_prime=0.0)
    bundle = build_bundle(spec, PARAMS)
    psi = spin.make_polarized_state(6)
    obs = magnetization_observer(6)
    values = [obs(psi)[0]]
    for _ in range(100):
        psi = floquet_step(psi, bundle)
        values.append(obs(psi)[0])
    expected = np.array([(-1.0) ** n for n in range(101)])
    deviation = np.abs(np.array(values) - expected).max()
    report("1 period doubling", deviation < 1e-10, f"max deviation {deviation:.2e}")
    assert deviation < 1e-10


# -------------------------------------------------------------------- 2


def test_criterion_02_gap_scaling_in_eps_uniform_drive():
    """Verbatim criterion: slope(log Delta vs log eps) = L +- 0.3 at t1=1.

    Expected to fail: the prescribed eps window is outside the regime
    where the eps^L law holds at t1 = 1 (the splitting follows
    (2*pi*eps/(t1*J))^L only while that ratio stays small).
    """
    eps_values = [0.05, 0.07, 0.1, 0.14, 0.2]
    slopes = {}
    for L in (4, 6):
        deltas = []
        for e in eps_values:
            spec = build_geometry("chain-boundary", L, eps=e, eps_prime=e)
            deltas.append(spectrum_report(two_period_average_hamiltonian(spec, PARAMS)).delta)
        slopes[L] = float(np.polyfit(np.log(eps_values), np.log(deltas), 1)[0])
    ok = all(abs(slopes[L] - L) < 0.3 for L in (4, 6))
    report(
        "2 gap scaling in eps (uniform, t1=1)",
        ok,
        f"slopes L=4: {slopes[4]:.3f} (want 4 +- 0.3), L=6: {slopes[6]:.3f} (want 6 +- 0.3)",
    )
    assert ok, (
        f"slope(L=4)={slopes[4]:.3f}, slope(L=6)={slopes[6]:.3f}: the eps^L law "
        "requires 2*pi*eps/(t1*J) << 1, which the prescribed window at t1=1 violates"
    )


# -------------------------------------------------------------------- 3


def test_criterion_03_gap_scaling_in_eps_prime():
    eps_primes = np.logspace(-4, -2, 7)
    deltas = []
    for ep in eps_primes:
        spec = build_geometry("chain-boundary", 8, eps=0.1, eps_prime=float(ep))
        deltas.append(spectrum_report(two_period_average_hamiltonian(spec, PARAMS)).delta)
    slope = float(np.polyfit(np.log(eps_primes), np.log(deltas), 1)[0])
    ok = abs(slope - 1.0) < 0.05
    report("3 gap scaling in eps' (metronome)", ok, f"slope {slope:.4f} (want 1 +- 0.05)")
    assert ok


# -------------------------------------------------------------------- 4


def fitted_lifetime(eps, eps_prime, L=8, periods=1e8):
    spec = ScanSpec(
        eps_values=(eps,), eps_prime_values=(eps_prime,), L=L, t1=1.0,
        periods=periods, strategy="spectral",
    )
    result = run_point(spec, eps, eps_prime)
    return result


def test_criterion_04_lifetime_exponent_alpha():
    eps_primes = (1e-2, 3.16e-3, 1e-3, 3.16e-4, 1e-4)
    points = []
    for ep in eps_primes:
        result = fitted_lifetime(0.1, ep)
        assert result.status == STATUS_OK
        points.append((ep, result.fit.lifetime))
    fit = fit_power_law(points)
    alpha = fit.params["beta"]
    ok = abs(alpha + 1.0) < 0.05
    report("4 lifetime exponent alpha", ok, f"alpha {alpha:.4f} (want -1 +- 0.05)")
    assert ok


# -------------------------------------------------------------------- 5


def test_criterion_05_lifetime_exponent_beta():
    eps_grid = np.round(np.logspace(np.log10(0.05), np.log10(0.45), 10), 4)
    points = []
    for e in eps_grid:
        result = fitted_lifetime(float(e), 1e-5, periods=1e10)
        if result.status == STATUS_OK:
            points.append((float(e), result.fit.lifetime))
    fit = fit_power_law(points, with_offset=True)
    beta = fit.params["beta"]
    ok = abs(beta + 7.0) < 1.0
    report(
        "5 lifetime exponent beta",
        ok,
        f"beta {beta:.3f} (want -(L-1) = -7 +- 1), offset {fit.params['c']:.3g}, "
        f"{len(points)} resolved points",
    )
    assert ok


# -------------------------------------------------------------------- 6


def test_criterion_06_metronome_enhancement_ratio():
    slow = fitted_lifetime(0.1, 1e-3)
    fast = fitted_lifetime(0.1, 0.1)
    assert slow.status == STATUS_OK and fast.status == STATUS_OK
    ratio = slow.fit.lifetime / fast.fit.lifetime
    ok = 50.0 <= ratio <= 200.0
    report("6 enhancement ratio", ok, f"T_R(1e-3)/T_R(0.1) = {ratio:.1f} (want 100 within x2)")
    assert ok


# -------------------------------------------------------------------- 7


def test_criterion_07_effective_hamiltonian_fidelity():
    spec = build_geometry("chain-boundary", 8, eps=0.1, eps_prime=1e-3)
    bundle = build_bundle(spec, PARAMS, dense=True, spectral=True)
    grid = log_grid(1e4, 30, even_only=True)
    psi = spin.make_polarized_state(8)
    obs = magnetization_observer(8)
    m_full = evolve_on_grid(psi, bundle, grid, "spectral", observer=obs)[:, 0]
    H = two_period_average_hamiltonian(spec, PARAMS)
    m_eff = effective_evolve(psi, H, grid.periods * PARAMS.T, observer=obs)[:, 0]
    rms = float(np.sqrt(np.mean((m_full - m_eff) ** 2)))
    ok = rms < 0.05
    report("7 effective-Hamiltonian fidelity", ok, f"RMS {rms:.4f} (want < 0.05)")
    assert ok


# -------------------------------------------------------------------- 8


def edge_ensemble(geometry, L, eps, eps_prime, sites, max_periods, count=100, ppd=30):
    spec = build_geometry(geometry, L, eps=eps, eps_prime=eps_prime)
    bundle = build_bundle(spec, PARAMS, dense=True, spectral=True)
    grid = log_grid(max_periods, ppd, even_only=True)
    sampler = BitstringSampler(L, seed=11)
    return ensemble_average(
        sampler, count,
        lambda bits: autocorrelator_trace(bits, bundle, grid, sites, "spectral"),
        jobs=4,
    )


def test_criterion_08_edge_mode_enhancement():
    L = 10
    met = edge_ensemble("chain-boundary", L, 0.1, 1e-4, (1, 5, 10), 1e4)
    n = met.grid.periods
    at = np.argmin(np.abs(n - 10**4))
    z1, zb, zL = (met.series[f"Z_{s}"][at] for s in (1, 5, 10))

    uni = edge_ensemble("chain-boundary", L, 0.1, 0.1, (10,), 1e4)
    z_uni_min = float(uni.series["Z_10"][uni.grid.periods <= 10**4].min())

    ok = (z1 > 0.5) and (zL > 0.5) and (abs(zb) < 0.1) and (z_uni_min < 0.2)
    report(
        "8 edge-mode enhancement",
        ok,
        f"metronome: Z_1={z1:.3f}, Z_10={zL:.3f} (want > 0.5), |Z_5|={abs(zb):.3f} "
        f"(want < 0.1); uniform: min Z_10 up to n=1e4 = {z_uni_min:.3f} (want < 0.2)",
    )
    assert z1 > 0.5 and zL > 0.5
    assert abs(zb) < 0.1
    assert z_uni_min < 0.2


# -------------------------------------------------------------------- 9


def test_criterion_09_external_geometry_contrast():
    # polarized lifetimes comparable between external and in-chain metronome
    chain = fitted_lifetime(0.1, 1e-4, L=10, periods=1e9)
    spec_ext = ScanSpec(
        eps_values=(0.1,), eps_prime_values=(1e-4,), geometry="external",
        L=10, t1=1.0, periods=1e9, strategy="spectral",
    )
    ext = run_point(spec_ext, 0.1, 1e-4)
    assert chain.status == STATUS_OK and ext.status == STATUS_OK
    ratio = ext.fit.lifetime / chain.fit.lifetime
    polarized_ok = 1 / 3 <= ratio <= 3

    # ensemble: edge of the external layout decays at the no-metronome
    # timescale (~1e3 cycles) to a reduced plateau, while the in-chain
    # metronome keeps the opposite edge alive
    ext_tr = edge_ensemble("external", 10, 0.1, 1e-4, (10, 9), 3e4, ppd=24)
    chain_tr = edge_ensemble("chain-boundary", 10, 0.1, 1e-4, (1, 10), 3e4, ppd=24)
    n = ext_tr.grid.periods
    at3k = np.argmin(np.abs(n - 3000))
    ext_edge_3k = float(ext_tr.series["Z_9"][at3k])
    chain_edge_3k = float(chain_tr.series["Z_10"][at3k])
    window = (n >= 3000) & (n <= 30000)
    plateau_lo = float(ext_tr.series["Z_9"][window].min())
    plateau_hi = float(ext_tr.series["Z_9"][window].max())
    metronome_alive = float(ext_tr.series["Z_10"][at3k])

    ensemble_ok = (
        ext_edge_3k < 0.3
        and chain_edge_3k > 0.4
        and plateau_lo > 0.03
        and plateau_hi < 0.4
        and metronome_alive > 0.9
    )
    report(
        "9 external-geometry contrast",
        polarized_ok and ensemble_ok,
        f"T_R ratio ext/chain = {ratio:.2f} (want within x3); edge Z_9(3e3) = "
        f"{ext_edge_3k:.3f} vs chain Z_10(3e3) = {chain_edge_3k:.3f}; reduced "
        f"plateau in [{plateau_lo:.3f}, {plateau_hi:.3f}] over n in [3e3, 3e4]",
    )
    assert polarized_ok
    assert ensemble_ok


# -------------------------------------------------------------------- 10 (property suites)


def test_criterion_10a_unitarity_and_norm_drift():
    spec = build_geometry("chain-boundary", 2, eps=0.1, eps_prime=1e-3)
    bundle = build_bundle(spec, PARAMS)
    psi = spin.make_polarized_state(2)
    for _ in range(10**6):
        psi = floquet_step(psi, bundle)
    drift = abs(float(np.linalg.norm(psi)) - 1.0)

    spec6 = build_geometry("chain-boundary", 6, eps=0.1, eps_prime=1e-3)
    dense = build_bundle(spec6, PARAMS, dense=True).dense
    powers = _binary_powers(dense, 40)
    eye = np.eye(len(dense))
    power_drift = max(float(np.abs(P.conj().T @ P - eye).max()) for P in powers)

    ok = drift < 1e-8 and power_drift < 1e-6
    report(
        "10a unitarity / norm drift",
        ok,
        f"norm drift over 1e6 steps {drift:.2e} (want < 1e-8); "
        f"max unitarity drift of squared powers up to 2^40 {power_drift:.2e} (want < 1e-6)",
    )
    assert ok


def test_criterion_10b_parity_conservation():
    spec = build_geometry("chain-boundary", 8, eps=0.13, eps_prime=0.01)
    bundle = build_bundle(spec, PARAMS)
    rng = np.random.default_rng(1)
    psi = rng.normal(size=256) + 1j * rng.normal(size=256)
    psi /= np.linalg.norm(psi)
    p0 = spin.parity_expectation(psi)
    worst = 0.0
    for _ in range(500):
        psi = floquet_step(psi, bundle)
        worst = max(worst, abs(spin.parity_expectation(psi) - p0))
    ok = worst < 1e-8
    report("10b parity conservation (h=0)", ok, f"max |<P> - <P>_0| = {worst:.2e} (want < 1e-8)")
    assert ok


def test_criterion_10c_strategy_equivalence():
    spec = build_geometry("chain-boundary", 8, eps=0.1, eps_prime=1e-3)
    bundle = build_bundle(spec, PARAMS, dense=True, spectral=True)
    psi = spin.make_polarized_state(8)
    grid = TimeGrid(np.array([0, 2, 64, 512, 2048, 4096]))
    obs = magnetization_observer(8, sites=(1, 8))
    outs = [
        evolve_on_grid(psi, bundle, grid, s, observer=obs)
        for s in ("step", "binary-power", "spectral")
    ]
    worst = max(
        float(np.abs(outs[0] - outs[1]).max()), float(np.abs(outs[0] - outs[2]).max())
    )
    ok = worst < 1e-6
    report("10c strategy equivalence", ok, f"max observable deviation {worst:.2e} (want < 1e-6)")
    assert ok


def test_criterion_10d_fit_recovery():
    """Noiseless synthesis recovered to 0.1%; 1% noise to 5%.

    The noisy bound is checked on the median over five fixed noise
    realizations per model (a single draw of the three-parameter offset
    model has irreducible sampling spread of a few percent).
    """
    t = np.unique(np.round(np.logspace(2, 7, 300)))

    def run_models(level, rng):
        # 1% noise: additive at the oscillation scale for trace models,
        # per-point relative for power laws spanning decades
        additive = lambda y, scale: y + level * scale * rng.normal(size=len(y))
        relative = lambda y: y * (1.0 + level * rng.normal(size=len(y)))
        errs = []

        def track(recovered, truth):
            errs.append(max(abs(r / t0 - 1.0) for r, t0 in zip(recovered, truth)))

        r = fit_cosine((t, additive(0.8 * np.cos(2 * np.pi * t / 1e4), 0.8)), window=(1e2, 1e10))
        track((r.params["A"], r.params["T_R"]), (0.8, 1e4))
        r = fit_sigmoid((t, additive(expit(-1e-4 * t), 1.0)), window=(1e2, 1e10))
        track((r.params["c"], 1 / r.params["alpha"]), (1.0, 1e4))
        x = np.logspace(-7, -3, 40)
        r = fit_power_law(np.column_stack([x, relative(2.0 * x**-1.0)]))
        track((r.params["a"], r.params["beta"]), (2.0, -1.0))
        xo = np.logspace(-1, 1, 100)
        r = fit_power_law(np.column_stack([xo, relative(5 * xo**-3.0 + 300)]), with_offset=True)
        track((r.params["a"], r.params["beta"], r.params["c"]), (5.0, -3.0, 300.0))
        return errs

    worst_clean = max(run_models(0.0, np.random.default_rng(0)))
    per_model = np.array([run_models(0.01, np.random.default_rng(seed)) for seed in range(5)])
    worst_noisy = float(np.median(per_model, axis=0).max())

    ok = worst_clean < 1e-3 and worst_noisy < 0.05
    report(
        "10d fit recovery",
        ok,
        f"noiseless worst {worst_clean:.2e} (want < 1e-3); 1% noise median-of-5 worst "
        f"{worst_noisy:.2e} (want < 5e-2)",
    )
    assert ok


def test_criterion_10e_rabi_period_gap_duality():
    worst = 0.0
    for (L, e, ep) in ((6, 0.1, 0.1), (6, 0.1, 0.01), (8, 0.1, 1e-3), (8, 0.08, 1e-2)):
        spec = build_geometry("chain-boundary", L, eps=e, eps_prime=ep)
        H = two_period_average_hamiltonian(spec, PARAMS)
        delta = spectrum_report(H).delta
        horizon = min(1e10, 40 * 2 * np.pi / (delta * PARAMS.T))
        grid = log_grid(horizon, 30, even_only=True)
        m = effective_evolve(
            spin.make_polarized_state(L), H, grid.periods * PARAMS.T,
            observer=magnetization_observer(L),
        )[:, 0]
        fit = fit_cosine((grid.periods.astype(float), m), window=(1e2, 1e10))
        worst = max(worst, abs(fit.lifetime * PARAMS.T * delta / (2 * np.pi) - 1.0))
    ok = worst < 0.02
    report("10e T_R * Delta = 2 pi", ok, f"worst relative deviation {worst:.4f} (want < 0.02)")
    assert ok


def test_criterion_10f_scan_determinism_and_resume(tmp_path):
    spec = ScanSpec(
        eps_values=(0.1, 0.2), eps_prime_values=(0.02, 0.005), L=5, t1=1.0,
        periods=1e4, points_per_decade=16, strategy="spectral", seed=3, jobs=1,
    )
    a, b = tmp_path / "a", tmp_path / "b"
    run_scan(spec, a)
    run_scan(ScanSpec(**{**spec.__dict__, "jobs": 3}), b)

    def tree(root):
        return {
            str(p.relative_to(root)): p.read_bytes()
            for p in sorted(Path(root).rglob("*"))
            if p.is_file() and p.name != "manifest.json"
        }

    deterministic = tree(a) == tree(b)
    (a / "points" / "001_000.json").unlink()
    resumed = run_scan(spec, a)
    resumable = resumed.manifest["computed_points"] == 1 and tree(a) == tree(b)
    ok = deterministic and resumable
    report(
        "10f scan determinism and resumability",
        ok,
        f"parallel runs identical: {deterministic}; resume recomputed exactly "
        f"the missing point: {resumable}",
    )
    assert ok


# -------------------------------------------------------------------- 11


def test_criterion_11_disorder_pipeline():
    dist = DisorderDistribution(
        J_range=(0.5, 1.5), h_range=(-1.0, 1.0), realizations=50, base_seed=42
    )
    spec = ScanSpec(
        eps_values=(0.1,), eps_prime_values=(1e-3,), L=8, t1=1.0,
        periods=1e8, strategy="spectral", disorder=dist, seed=42,
    )
    first = disorder_average(spec, 0.1, 1e-3)
    second = disorder_average(spec, 0.1, 1e-3)
    fit_a = fit_sigmoid(first, series="m_global")
    fit_b = fit_sigmoid(second, series="m_global")
    lifetime = fit_a.lifetime
    reproducible = abs(fit_a.lifetime - fit_b.lifetime) <= 1e-6 * fit_a.lifetime
    ok = fit_a.converged and np.isfinite(lifetime) and lifetime > 0 and reproducible
    report(
        "11 disorder pipeline",
        ok,
        f"sigmoid lifetime 1/alpha = {lifetime:.1f} periods over 50 realizations; "
        f"rerun agrees to {abs(fit_a.lifetime - fit_b.lifetime):.2e}",
    )
    assert ok
