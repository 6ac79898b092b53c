import math

import numpy as np
import pytest

from hagprop.classical_flow import FlowState, RegionExit, linearization_check, propagate, rhs
from hagprop.electronic import RegionError, Region, avoided_crossing, free, trivial_adiabatic
from hagprop.multiindex import MultiIndexTable
from hagprop.reference import GridSpec, GridState
from hagprop.reference import propagate as ref_propagate
from hagprop.wavepacket import WavepacketParams, evaluate_basis, random_params


def test_rhs_harmonic():
    m = trivial_adiabatic(1.0, 1.0)
    da, deta, dA, dB, dS = rhs(FlowState(0.0, WavepacketParams(1.0, 1.0, 1.0, 0.0)), m)
    assert da[0] == 0
    assert deta[0] == pytest.approx(-1.0, abs=1e-12)
    assert dA[0, 0] == pytest.approx(1j)
    assert dB[0, 0] == pytest.approx(1j, abs=1e-12)
    assert dS == pytest.approx(-0.5, abs=1e-12)


def test_rhs_constant_energy_and_two_level_gradient():
    _, deta, _, dB, dS = rhs(WavepacketParams(1.0, 1.0, 0.3, 0.7), free(1.0))
    assert deta[0] == 0 and dB[0, 0] == 0
    assert dS == pytest.approx(0.5 * 0.49)
    m = avoided_crossing(0.5, 0.0)
    a = 0.4
    _, deta, *_ = rhs(WavepacketParams(1.0, 1.0, a, 0.0), m)
    assert deta[0] == pytest.approx(a / math.sqrt(a * a + 0.25), abs=1e-10)


def test_harmonic_orbit():
    m = trivial_adiabatic(1.0, 1.0)
    tr = propagate(WavepacketParams(1.0, 1.0, 1.0, 0.0), 2 * math.pi, 1e-3, m)
    t = tr.t
    assert np.max(np.abs(tr.a[:, 0] - np.cos(t))) < 1e-8
    assert np.max(np.abs(tr.eta[:, 0] + np.sin(t))) < 1e-8
    assert np.max(np.abs(tr.A[:, 0, 0] - np.exp(1j * t))) < 1e-8
    assert tr.t[-1] == pytest.approx(2 * math.pi)


def test_free_flow_widths():
    tr = propagate(WavepacketParams(1.0, 1.0, 0.0, 0.5), 1.5, 1e-2, free(1.0))
    assert np.max(np.abs(tr.A[:, 0, 0] - (1 + 1j * tr.t))) < 1e-12
    assert np.max(np.abs(tr.B[:, 0, 0] - 1)) < 1e-14


def test_invariants_on_avoided_crossing():
    m = avoided_crossing(0.6, 1.0)
    tr = propagate(WavepacketParams(1.0, 1.0, -1.2, 2.2), 2.0, 1e-3, m)
    assert tr.max_defect() < 1e-8
    assert tr.energy_drift() < 1e-8


def test_time_reversal():
    m = avoided_crossing(0.5, 1.0)
    p0 = random_params(1, 1.0, rng=3).with_(a=np.array([-0.5]), eta=np.array([1.0]))
    fwd = propagate(p0, 1.0, 1e-3, m)
    end = fwd.params(1.0, 1.0)
    back = propagate(FlowState(1.0, end), -1.0, 1e-3, m)
    assert back.t[-1] == pytest.approx(0.0, abs=1e-12)
    assert abs(back.a[-1, 0] - p0.a[0]) < 1e-7
    assert abs(back.eta[-1, 0] - p0.eta[0]) < 1e-7
    assert np.max(np.abs(back.A[-1] - p0.A)) < 1e-7
    assert np.max(np.abs(back.B[-1] - p0.B)) < 1e-7


def test_dense_output_is_smooth():
    m = avoided_crossing(0.6, 1.0)
    coarse = propagate(WavepacketParams(1.0, 1.0, -1.2, 2.2), 1.0, 1e-2, m)
    fine = propagate(WavepacketParams(1.0, 1.0, -1.2, 2.2), 1.0, 1e-4, m)
    tq = np.linspace(0, 1, 37)
    a1 = coarse.state(tq)[0]
    a2 = fine.state(tq)[0]
    assert np.max(np.abs(a1 - a2)) < 1e-7


def test_linearization_identities():
    assert linearization_check(propagate(WavepacketParams(1.0, 1.0, 1.0, 0.0), 1.0, 1e-2, trivial_adiabatic()),
                               trivial_adiabatic()) < 1e-5
    assert linearization_check(propagate(WavepacketParams(1.0, 1.0, 0.0, 1.0), 1.0, 1e-2, free()), free()) < 1e-9
    m = avoided_crossing(0.5, 0.0)
    assert linearization_check(propagate(WavepacketParams(1.0, 1.0, -0.5, 1.0), 1.0, 1e-2, m), m) < 1e-4


def test_region_exit_reports_time():
    m = free(1.0, region=Region(np.array([-1.0]), np.array([0.5])))
    with pytest.raises(RegionExit) as info:
        propagate(WavepacketParams(1.0, 1.0, 0.0, 1.0), 2.0, 1e-2, m)
    assert info.value.exit_time == pytest.approx(0.5, abs=1e-9)
    tr = propagate(WavepacketParams(1.0, 1.0, 0.0, 1.0), 2.0, 1e-2, m, on_exit="truncate")
    assert tr.exit_time == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(RegionError):
        propagate(WavepacketParams(1.0, 1.0, 2.0, 1.0), 1.0, 1e-2, m)


def test_bad_step():
    with pytest.raises(ValueError):
        propagate(WavepacketParams(1.0, 1.0, 0.0, 1.0), 1.0, 0.0, free())


def test_quadratic_packet_solves_schroedinger():
    # excited packet on a harmonic level against the reference solver
    eps = 0.3
    m = trivial_adiabatic(1.0, 1.0)
    tr = propagate(WavepacketParams(1.0, 1.0, 0.5, 0.5), 1.0, 1e-3, m)
    g = GridSpec.interval(-6, 6, 256, 2)
    x = g.points()

    def packet(t):
        v = np.zeros((len(x), 2), dtype=complex)
        p = tr.params(t, eps ** 2)
        v[:, 0] = np.exp(1j * p.S / eps ** 2) * evaluate_basis(p, MultiIndexTable(1, 2), x)[:, 2]
        return v

    out = ref_propagate(GridState(g, packet(0.0), 0.0, eps), 1.0, 1e-3, m)
    err = math.sqrt(g.cell * np.sum(np.abs(out.values - packet(1.0)) ** 2))
    assert err < 1e-6
