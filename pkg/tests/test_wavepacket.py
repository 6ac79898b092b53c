import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hagprop.multiindex import MultiIndexTable
from hagprop.wavepacket import (BasisBlock, ParameterError, WavepacketParams, cond1_defects, derivative_matrix,
                                eval_phi0, evaluate_basis, gram_matrix, position_matrix, projector_norm_check,
                                quadrature_rule, raise_all, random_params)

seeds = st.integers(0, 10_000)


def test_cond1_defects_examples():
    assert cond1_defects(np.eye(2), np.eye(2)) == (0.0, 0.0)
    sym, herm = cond1_defects(2 * np.eye(3), np.eye(3))
    assert sym == 0.0
    assert herm == pytest.approx(2 * math.sqrt(3))
    C = np.array([[1.0, 0.3], [0.3, -0.5]])
    assert max(cond1_defects(np.eye(2), np.eye(2) + 1j * C)) < 1e-15


def test_shape_errors():
    with pytest.raises(ParameterError):
        cond1_defects(np.eye(2), np.eye(3))
    with pytest.raises(ParameterError):
        WavepacketParams(np.eye(2), np.eye(2), [0.0], [0.0, 0.0])
    with pytest.raises(ParameterError):
        WavepacketParams(1.0, 1.0, 0.0, 0.0, hbar=0.0)


def test_ground_state_values():
    p = WavepacketParams(1.0, 1.0, 0.0, 0.0)
    v = eval_phi0(p, np.array([0.0, 1.0])[:, None])
    assert v[0] == pytest.approx(math.pi ** -0.25, abs=1e-15)
    assert v[1] == pytest.approx(math.pi ** -0.25 * math.exp(-0.5), abs=1e-15)


def test_hermite_functions():
    p = WavepacketParams(1.0, 1.0, 0.0, 0.0)
    x = np.linspace(-7, 7, 301)
    V = evaluate_basis(p, MultiIndexTable(1, 10), x[:, None])
    for j in range(11):
        c = np.zeros(j + 1)
        c[j] = 1
        ref = np.polynomial.hermite.hermval(x, c) * np.exp(-x ** 2 / 2) / math.sqrt(
            2.0 ** j * math.factorial(j) * math.sqrt(math.pi))
        assert np.max(np.abs(V[:, j] - ref)) < 1e-10


def test_raise_all_extends_evaluate_basis():
    p = random_params(2, 0.3, rng=4)
    X = np.random.default_rng(0).normal(size=(50, 2))
    block = BasisBlock.ground(p, X)
    for _ in range(4):
        block = raise_all(block)
    ref = evaluate_basis(p, MultiIndexTable(2, 4), X)
    assert np.max(np.abs(block.values - ref)) < 1e-12


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from([1.0, 0.1, 0.01]))
def test_gram_matrix_identity_d1(seed, hbar):
    G = gram_matrix(random_params(1, hbar, rng=seed), MultiIndexTable(1, 8))
    assert np.linalg.norm(G - np.eye(9)) < 1e-8


def test_gram_matrix_identity_d2():
    G = gram_matrix(random_params(2, 0.1, rng=7), MultiIndexTable(2, 5))
    assert np.linalg.norm(G - np.eye(len(G))) < 1e-8


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(0, 3))
def test_position_matrix_band_and_quadrature(seed, m):
    p = random_params(1, 0.5, rng=seed)
    t = MultiIndexTable(1, 8)
    Y = position_matrix(p, t, m)
    for j in range(9):
        for q in range(9):
            if abs(j - q) > m:
                assert Y[j, q] == 0
    X, W = quadrature_rule(p, 30)
    V = evaluate_basis(p, t, X)
    Yq = (V.conj() * (W * (X[:, 0] - p.a[0]) ** m)[:, None]).T @ V
    assert np.max(np.abs(Y - Yq)) < 1e-8


def test_position_matrix_raises_support_by_m():
    p = random_params(1, 0.2, rng=1)
    t = MultiIndexTable(1, 10)
    v = np.zeros(11, dtype=complex)
    v[:4] = 1.0
    out = position_matrix(p, t, 3) @ v
    assert np.all(out[7:] == 0)
    assert np.any(out[6] != 0)


def test_derivative_matrix_anti_adjoint_without_momentum():
    p = random_params(1, 0.3, rng=2).with_(eta=np.array([0.0]))
    D = derivative_matrix(p, MultiIndexTable(1, 8), 1)
    assert np.max(np.abs(D + D.conj().T)) < 1e-12


def test_derivative_matrix_entry_2_6_vanishes():
    p = random_params(1, 0.3, rng=3)
    assert derivative_matrix(p, MultiIndexTable(1, 8), 1)[2, 6] == 0
    assert position_matrix(p, MultiIndexTable(1, 8), 1)[2, 6] == 0


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(0, 6))
def test_position_uncertainty(seed, j):
    p = random_params(1, 0.1, rng=seed)
    X, W = quadrature_rule(p, 30)
    v = evaluate_basis(p, MultiIndexTable(1, j), X)[:, j]
    dens = W * np.abs(v) ** 2
    mean = np.sum(dens * X[:, 0])
    var = np.sum(dens * (X[:, 0] - mean) ** 2)
    assert math.sqrt(var) == pytest.approx(math.sqrt((j + 0.5) * p.hbar) * abs(p.A[0, 0]), abs=1e-8)


def test_projector_bound_trivial_and_dense_oracle():
    p = random_params(1, 0.04, rng=5)
    t = MultiIndexTable(1, 10)
    lhs, rhs = projector_norm_check(p, t, 3, 0)
    assert lhs == pytest.approx(1.0) and rhs == 1.0
    lhs, rhs = projector_norm_check(p, t, 4, 2)
    # dense oracle: position operator squared on a bigger basis, restricted to |j| <= 4
    big = MultiIndexTable(1, 20)
    Y1 = position_matrix(p, big, 1)
    dense = (Y1 @ Y1)[:, :5]
    assert lhs == pytest.approx(np.linalg.norm(dense, 2), rel=1e-12)
    assert lhs <= rhs


@settings(max_examples=10, deadline=None)
@given(seeds, st.sampled_from([1.0, 0.1, 0.01]))
def test_projector_bound_holds(seed, hbar):
    p = random_params(1, hbar, rng=seed)
    t = MultiIndexTable(1, 10)
    for n in range(7):
        for m in range(4):
            lhs, rhs = projector_norm_check(p, t, n, m)
            assert lhs <= rhs * (1 + 1e-12)


def test_projector_check_needs_large_table():
    p = random_params(1, 1.0, rng=0)
    with pytest.raises(ValueError):
        projector_norm_check(p, MultiIndexTable(1, 4), 3, 2)
