"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""

import math
import time

import numpy as np
import pytest
from conftest import record

from hagprop.classical_flow import linearization_check
from hagprop.classical_flow import propagate as flow_propagate
from hagprop.config import load_config, scenario_path
from hagprop.expansion import recursion_residuals
from hagprop.multiindex import MultiIndexTable
from hagprop.truncation import has_interior_minimum, localization_sweep, prepare, sweep_orders
from hagprop.wavepacket import (WavepacketParams, evaluate_basis, gram_matrix, position_matrix,
                                projector_norm_check, quadrature_rule, random_params)


def test_c01_basis_orthonormality():
    t0 = time.perf_counter()
    table = MultiIndexTable(1, 8)
    worst = 0.0
    for hbar in (1.0, 0.1, 0.01):
        for seed in range(3):
            G = gram_matrix(random_params(1, hbar, rng=seed), table)
            worst = max(worst, float(np.linalg.norm(G - np.eye(len(table)))))
    secs = time.perf_counter() - t0
    ok = worst <= 1e-8 and secs < 5
    record("C1 basis orthonormality", ok, f"max Frobenius deviation {worst:.2e}, {secs:.2f}s")
    assert ok


def test_c02_hermite_functions():
    p = WavepacketParams(1.0, 1.0, 0.0, 0.0)
    x = np.linspace(-8, 8, 401)
    V = evaluate_basis(p, MultiIndexTable(1, 10), x[:, None])
    worst = 0.0
    for j in range(11):
        c = np.zeros(j + 1)
        c[j] = 1.0
        ref = np.polynomial.hermite.hermval(x, c) * np.exp(-x ** 2 / 2) / math.sqrt(
            2.0 ** j * math.factorial(j) * math.sqrt(math.pi))
        worst = max(worst, float(np.max(np.abs(V[:, j] - ref))))
    ok = worst <= 1e-10
    record("C2 Hermite identification", ok, f"max pointwise deviation {worst:.2e}")
    assert ok


def test_c03_band_structure_and_moment_bound():
    band_bad = 0
    quad_dev = 0.0
    ratio = 0.0
    for seed in range(3):
        p = random_params(1, 0.1 * (seed + 1), rng=seed)
        t = MultiIndexTable(1, 10)
        X, W = quadrature_rule(p, 30)
        V = evaluate_basis(p, t, X)
        for m in range(4):
            Y = position_matrix(p, t, m)
            band_bad += sum(Y[j, q] != 0 for j in range(11) for q in range(11) if abs(j - q) > m)
            Yq = (V.conj() * (W * (X[:, 0] - p.a[0]) ** m)[:, None]).T @ V
            quad_dev = max(quad_dev, float(np.max(np.abs(Y - Yq))))
        for n in range(7):
            for m in range(4):
                lhs, rhs = projector_norm_check(p, t, n, m)
                ratio = max(ratio, lhs / rhs)
    ok = band_bad == 0 and quad_dev <= 1e-8 and ratio <= 1.0 + 1e-12
    record("C3 band structure and moment bound", ok,
           f"off-band nonzeros {band_bad}, quadrature deviation {quad_dev:.2e}, max norm/bound {ratio:.4f}")
    assert ok


def test_c04_flow_invariants(avoided_prepared):
    sc = avoided_prepared.scenario
    model = avoided_prepared.model
    traj = flow_propagate(sc.initial_params(), 2.0, 1e-3, model)
    defect, drift = traj.max_defect(), traj.energy_drift()
    lin = linearization_check(traj, model)
    ok = defect <= 1e-8 and drift <= 1e-8 and lin <= 1e-4
    record("C4 flow invariants", ok, f"defect {defect:.2e}, energy drift {drift:.2e}, linearization {lin:.2e}")
    assert ok


def test_c05_quadratic_exactness(trivial_sweep):
    s, secs = trivial_sweep
    worst = max(s.errors)
    ok = len(s.errors) == 7 and worst <= 1e-6 and secs < 60
    record("C5 quadratic exactness", ok, f"max error over N=0..6 {worst:.2e}, {secs:.1f}s")
    assert ok


def test_c06_fixed_order_scaling(avoided_sweep, avoided_prepared):
    res, _ = avoided_sweep
    sel = [s for s in res.sweeps if s.eps >= 0.2 - 1e-12]
    assert sorted(s.eps for s in sel) == [0.2, 0.25, 0.3, 0.35]
    secs = avoided_prepared.seconds + sum(s.seconds for s in sel)
    slopes = res.slopes
    ok = all(N in slopes and slopes[N] >= N - 0.3 for N in (1, 2, 3)) and secs < 600
    detail = ", ".join(f"N={N} slope {slopes.get(N, float('nan')):.2f}" for N in (1, 2, 3))
    record("C6 fixed-order eps^N scaling", ok, f"{detail}, {secs:.0f}s")
    assert ok


def test_c07_optimal_truncation(avoided_sweep):
    res, secs = avoided_sweep
    by_eps = sorted(res.sweeps, key=lambda s: s.eps)
    interior = [has_interior_minimum(s) for s in by_eps[:3]]
    fit = res.fit
    assert fit is not None, "too few sweeps above the solver floor to fit"
    ok = (all(interior) and fit["Gamma"] > 0 and fit["R2"] >= 0.9
          and fit["rss"] < fit["power_law"]["rss"] and secs < 1800)
    record("C7 optimal truncation", ok,
           f"argmin N {[s.argmin for s in res.sweeps]}, Gamma {fit['Gamma']:.3f}, R2 {fit['R2']:.3f}, "
           f"rss {fit['rss']:.3f} vs power law {fit['power_law']['rss']:.3f}, {secs:.0f}s")
    assert ok


def test_c08_localization(avoided_prepared):
    loc = localization_sweep(avoided_prepared, 0.5, [0.3, 0.2, 0.15])
    ratios = [r["mass"] / r["oracle"] for r in loc["rows"]]
    ok = loc["slope"] is not None and loc["slope"] < 0 and all(0.5 <= q <= 2.0 for q in ratios)
    record("C8 localization", ok,
           f"mass/oracle {[round(q, 3) for q in ratios]}, slope in 1/eps^2 {loc['slope']:.4f}")
    assert ok


@pytest.fixture(scope="module")
def extra_sweeps():
    """Single-eps sweeps of the remaining built-in scenarios."""
    out = []
    for name, eps in (("complex_crossing", 0.25), ("anharmonic", 0.2)):
        sc, _ = load_config(scenario_path(name))
        out.append((name, sweep_orders(prepare(sc), eps)))
    return out


def test_c09_duhamel_consistency(avoided_sweep, trivial_sweep, extra_sweeps):
    res, _ = avoided_sweep
    sweeps = [("avoided_crossing", s) for s in res.sweeps] + [("trivial_adiabatic", trivial_sweep[0])]
    sweeps += extra_sweeps
    bad, worst = [], 0.0
    for name, s in sweeps:
        for N, e, b, f in zip(s.orders, s.errors, s.bounds, s.floors):
            worst = max(worst, e / (b + 2 * f))
            if not e <= b + 2 * f:
                bad.append((name, s.eps, N))
    n_rows = sum(len(s.orders) for _, s in sweeps)
    ok = not bad
    record("C9 Duhamel consistency", ok,
           f"{n_rows} rows, max error/(bound + 2 floor) {worst:.3f}, violations {bad[:5]}")
    assert ok


def test_c10_recursion_self_consistency(avoided_prepared):
    ex = avoided_prepared.expansion
    res = recursion_residuals(ex, n_max=6)
    perp = max(r["perp"] for r in res.values())
    par = max(r["par"] for r in res.values())
    orth = max(r["orth"] for r in res.values())
    ct0 = max(r["c_t0"] for r in res.values())
    ok = perp <= 1e-7 and par <= 1e-7 and orth <= 1e-9 and ct0 == 0.0
    record("C10 recursion self-consistency", ok,
           f"perp {perp:.2e}, par {par:.2e}, orth {orth:.2e}, c_n(t=0) {ct0:.1e}")
    assert ok
