import math

import numpy as np
import pytest

from hagprop.electronic import avoided_crossing, trivial_adiabatic
from hagprop.multiindex import MultiIndexTable
from hagprop.reference import (GridMismatchError, GridSpec, GridState, ResolutionError, apply_hamiltonian,
                               check_resolution, error_norm, propagate, propagate_checked)
from hagprop.wavepacket import WavepacketParams, evaluate_basis

EPS = 0.5


def free_packet(grid, t, eps=EPS, eta=0.0):
    # exact free Gaussian: A(t) = 1 + i t, B = 1, a(t) = eta t, S = eta^2 t / 2
    A = 1 + 1j * t
    p = WavepacketParams(A, 1.0, eta * t, eta, 0.5 * eta ** 2 * t, eps ** 2, sqrt_det_A=np.sqrt(A))
    v = np.zeros((grid.nodes, 2), dtype=complex)
    v[:, 0] = np.exp(1j * p.S / eps ** 2) * evaluate_basis(p, MultiIndexTable(1, 0), grid.points())[:, 0]
    return v


@pytest.fixture(scope="module")
def grid():
    return GridSpec.interval(-8, 8, 256, 2)


def test_grid_validation():
    with pytest.raises(ValueError):
        GridSpec.interval(0, 1, 100, 2)
    with pytest.raises(ValueError):
        GridSpec.interval(1, 0, 64, 2)


def test_free_packet_matches_closed_form(grid):
    m = trivial_adiabatic(0.0, 1.0)
    out = propagate(GridState(grid, free_packet(grid, 0.0, eta=0.5), 0.0, EPS), 1.0, 1e-3, m)
    assert error_norm(out, GridState(grid, free_packet(grid, 1.0, eta=0.5), 1.0, EPS)) < 1e-8


def test_unitarity(grid):
    out = propagate(GridState(grid, free_packet(grid, 0.0), 0.0, EPS), 1.0, 1e-4, avoided_crossing(0.6, 1.0))
    assert abs(float(out.norm()) - 1.0) < 1e-10
    assert out.meta["steps"] == 10_000


def test_second_order_in_time(grid):
    m = avoided_crossing(0.6, 1.0)
    psi = GridState(grid, free_packet(grid, 0.0, eta=1.0), 0.0, EPS)
    ref = propagate(psi, 0.5, 0.5 / 4096, m).values
    errs = [np.linalg.norm(propagate(psi, 0.5, 0.5 / n, m).values - ref) for n in (32, 64, 128)]
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    assert all(abs(r - 4) / 4 < 0.2 for r in ratios)
    assert min(ratios) >= 3.9


def test_spectral_in_space():
    m = trivial_adiabatic(0.0, 1.0)
    errs = []
    for n in (64, 128):
        g = GridSpec.interval(-8, 8, n, 2)
        out = propagate(GridState(g, free_packet(g, 0.0), 0.0, EPS), 0.5, 1e-3, m)
        errs.append(error_norm(out, GridState(g, free_packet(g, 0.5), 0.5, EPS)))
    assert errs[1] < 1e-9 and errs[0] > 10 * errs[1]


def test_batched_propagation_is_linear(grid):
    m = avoided_crossing(0.6, 1.0)
    u = free_packet(grid, 0.0, eta=1.0)
    v = np.roll(u, 7, axis=0)[:, ::-1].copy()
    both = propagate(GridState(grid, np.stack([u, v, u + 2j * v]), 0.0, EPS), 0.3, 1e-3, m).values
    assert np.max(np.abs(both[2] - both[0] - 2j * both[1])) < 1e-12
    single = propagate(GridState(grid, u, 0.0, EPS), 0.3, 1e-3, m).values
    assert np.max(np.abs(single - both[0])) < 1e-13


def test_snapshots(grid):
    m = avoided_crossing(0.6, 1.0)
    psi = GridState(grid, free_packet(grid, 0.0, eta=1.0), 0.0, EPS)
    out = propagate(psi, 0.4, 1e-3, m, snapshots=4)
    times, vals = out.meta["snapshots"]
    assert np.allclose(times, [0.1, 0.2, 0.3, 0.4])
    assert np.max(np.abs(vals[-1] - out.values)) == 0
    mid = propagate(psi, 0.2, 1e-3, m)
    assert np.max(np.abs(vals[1] - mid.values)) < 1e-12


def test_step_halving_floor(grid):
    m = avoided_crossing(0.6, 1.0)
    psi = GridState(grid, free_packet(grid, 0.0, eta=1.0), 0.0, EPS)
    fine, floor, dt = propagate_checked(psi, 0.5, m, dt=0.5 / 64, tol=1e-6, max_halvings=4)
    assert floor <= 1e-6
    ref = propagate(psi, 0.5, 0.5 / 4096, m)
    true_err = error_norm(fine, ref)
    assert true_err < 3 * floor + 1e-10


def test_error_norm_examples(grid):
    u = GridState(grid, free_packet(grid, 0.0), 0.0, EPS)
    assert error_norm(u, u) == 0.0
    th = 0.7
    v = GridState(grid, np.exp(1j * th) * u.values, 0.0, EPS)
    assert error_norm(u, v) == pytest.approx(2 * abs(math.sin(th / 2)) * float(u.norm()), rel=1e-12)
    other = GridSpec.interval(-8, 8, 128, 2)
    with pytest.raises(GridMismatchError):
        error_norm(u, GridState(other, np.zeros((128, 2)), 0.0, EPS))
    with pytest.raises(ValueError):
        error_norm(u.values, v.values)


def test_grid_state_round_trip(grid, tmp_path):
    u = GridState(grid, free_packet(grid, 0.3), 0.3, EPS)
    u.dump(tmp_path / "u.grid")
    back = GridState.load(tmp_path / "u.grid")
    assert back.grid == grid and back.t == 0.3 and back.eps == EPS
    assert np.array_equal(back.values, u.values)
    raw = (tmp_path / "u.grid").read_bytes()
    assert raw.startswith(b"HAGGRID\n")
    (tmp_path / "x.grid").write_bytes(b"other\n")
    with pytest.raises(ValueError):
        GridState.load(tmp_path / "x.grid")


def test_resolution_check():
    eps = 0.1
    a, eta = np.array([[0.0]]), np.array([[1.0]])
    A, B = np.ones((1, 1, 1)), np.ones((1, 1, 1))
    ok = GridSpec.interval(-4, 4, 1024, 2)
    check_resolution(ok, eps, a, eta, A, B, 1.0)
    with pytest.raises(ResolutionError, match="spacing"):
        check_resolution(GridSpec.interval(-4, 4, 128, 2), eps, a, eta, A, B, 1.0)
    with pytest.raises(ResolutionError, match="does not contain"):
        check_resolution(GridSpec.interval(-1, 1, 1024, 2), eps, a, eta, A, B, 1.0)
    with pytest.raises(ResolutionError, match="carrier"):
        check_resolution(GridSpec.interval(-4, 4, 512, 2), eps, a, np.array([[3.0]]), A, B, 1.0)


def test_hamiltonian_on_stationary_state():
    # harmonic ground state with hbar = eps^2 is an eigenfunction with energy eps^2 / 2
    eps = 0.4
    g = GridSpec.interval(-6, 6, 256, 2)
    m = trivial_adiabatic(1.0, 1.0)
    v = np.zeros((256, 2), dtype=complex)
    v[:, 0] = evaluate_basis(WavepacketParams(1.0, 1.0, 0.0, 0.0, 0.0, eps ** 2), MultiIndexTable(1, 0),
                             g.points())[:, 0]
    Hv = apply_hamiltonian(g, m.hamiltonian(g.points()), eps, v)
    assert np.max(np.abs(Hv - 0.5 * eps ** 2 * v)) < 1e-12
