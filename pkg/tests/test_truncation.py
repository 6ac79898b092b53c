import csv
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hagprop.truncation import (OrderSweep, _order_values, fit_exponential, fit_power_law, fit_sweeps,
                                fixed_order_slopes, gaussian_tail_mass, has_interior_minimum, localization_sweep,
                                optimal_N, write_rows_csv)


def _sweep(eps, errors, floor=1e-12):
    n = len(errors)
    return OrderSweep(eps, list(range(n)), list(errors), [1.0] * n, [floor] * n, [1.0] * n, {}, 0.0, 0.0)


def test_optimal_N_examples():
    assert optimal_N("0.1", "0.5") == 25
    assert optimal_N(0.1, 0.5) == 25
    assert optimal_N(0.5, 0.5) == 1
    assert optimal_N(0.2, 0.4) == 4
    assert optimal_N(Fraction(1, 3), Fraction(1, 2)) == 2
    with pytest.raises(ValueError):
        optimal_N(0, 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.integers(1, 200))
def test_optimal_N_is_exact_floor(p, q, r):
    eps, g = Fraction(p, 100), Fraction(q, r)
    N = optimal_N(eps, g)
    assert N * eps * eps <= g * g < (N + 1) * eps * eps


def test_exponential_fit_recovers_synthetic_data():
    e = np.array([0.35, 0.3, 0.25, 0.2, 0.15])
    C, G, r2, rss = fit_exponential(e, 2 * np.exp(-0.3 / e ** 2))
    assert abs(C - 2) < 1e-10 and abs(G - 0.3) < 1e-10
    assert r2 == pytest.approx(1.0) and rss < 1e-20


def test_model_discrimination_on_power_law_data():
    e = np.array([0.35, 0.3, 0.25, 0.2, 0.15])
    poly = 3 * e ** 4
    _, _, r2, rss = fit_exponential(e, poly)
    p = fit_power_law(e, poly)
    assert p["p"] == pytest.approx(4.0)
    assert rss > p["rss"] and r2 < p["R2"]


def test_fit_errors():
    with pytest.raises(ValueError):
        fit_exponential([0.1], [1.0])
    with pytest.raises(ValueError):
        fit_exponential([0.1, 0.2], [0.0, 1.0])


def test_interior_minimum():
    assert has_interior_minimum(_sweep(0.2, [1, 0.5, 0.2, 0.4, 0.9]))
    assert not has_interior_minimum(_sweep(0.2, [1, 0.5, 0.2, 0.1]))
    assert not has_interior_minimum(_sweep(0.2, [0.1, 0.5, 0.2, 0.3]))
    assert not has_interior_minimum(_sweep(0.2, [1, 0.5, 0.2, 0.205]))


def test_order_values_cumulative():
    pieces = np.arange(5.0)[:, None, None] * np.ones((5, 3, 2))
    out = _order_values(pieces, 2)
    # order N: piece 0 plus perpendicular pieces 1..N+1
    assert np.allclose(out[:, 0, 0], [0 + 1, 0 + 1 + 2, 0 + 1 + 2 + 3])


def test_fixed_order_slopes_and_fit_selection():
    eps = [0.35, 0.3, 0.25, 0.2, 0.15]
    sweeps = [_sweep(e, [e ** 0.5, e ** 1.5, e ** 2.5, 4 * math.exp(-0.2 / e ** 2)]) for e in eps]
    slopes = fixed_order_slopes(sweeps)
    assert slopes[1] == pytest.approx(1.5) and slopes[2] == pytest.approx(2.5)
    res = fit_sweeps("synthetic", sweeps)
    assert res.fit is not None
    assert [s.eps for s in res.sweeps] == sorted(eps, reverse=True)
    # points at the solver floor are excluded from the exponential fit
    floored = [_sweep(e, [1e-3, 1e-9], floor=1e-9) for e in eps]
    assert fit_sweeps("floor", floored).fit is None


def test_gaussian_tail_oracle():
    assert gaussian_tail_mass(0.2, 0.0, 1.0) == pytest.approx(1.0)
    s = 0.2 / math.sqrt(2)
    assert gaussian_tail_mass(0.2, 0.3, 1.0) ** 2 == pytest.approx(math.erfc(0.3 / (math.sqrt(2) * s)))


def test_rows_csv_uses_17_digits(tmp_path):
    write_rows_csv(tmp_path / "r.csv", [{"eps": 0.1, "N": 3, "error": 1 / 3}])
    rows = list(csv.reader(open(tmp_path / "r.csv")))
    assert rows[0] == ["eps", "N", "error"]
    assert rows[1] == ["0.10000000000000001", "3", "0.33333333333333331"]
    assert float(rows[1][2]) == 1 / 3
    with pytest.raises(ValueError):
        write_rows_csv(tmp_path / "e.csv", [])


def test_trivial_sweep_rows(trivial_sweep):
    s, _ = trivial_sweep
    assert s.orders == list(range(7))
    assert len(s.rows("x")) == 7
    assert all(e <= 1e-6 for e in s.errors)
    assert all(abs(n - 1) < 1e-6 for n in s.norms)
    rows = s.series_rows(2)
    assert rows[0]["t"] == 0.0 and rows[-1]["t"] == pytest.approx(1.0)
    assert all(r["error"] <= r["bound"] + 2 * max(s.floors) for r in rows)


def test_localization_trivial(trivial_prepared):
    rep0 = localization_sweep(trivial_prepared, 0.0, [0.3, 0.2, 0.15])
    for r in rep0["rows"]:
        assert r["mass"] == pytest.approx(1.0, abs=1e-4)  # cutoff tail only
    r1 = localization_sweep(trivial_prepared, 0.2, [0.3, 0.2, 0.15])
    r2 = localization_sweep(trivial_prepared, 0.3, [0.3, 0.2, 0.15])
    assert r1["slope"] < 0 and r2["slope"] < r1["slope"]
    for r in r2["rows"]:
        assert 0.5 <= r["mass"] / r["oracle"] <= 2.0
    with pytest.raises(ValueError):
        localization_sweep(trivial_prepared, 5.0, [0.2])
