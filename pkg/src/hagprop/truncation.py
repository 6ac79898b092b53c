"""Truncation experiments: error versus order, optimal order and exponential fits.

A :class:`Scenario` bundles the model, the initial packet and the numerical
controls.  :func:`prepare` runs the classical flow and builds the coefficient
fields once (they do not depend on ``eps``); :func:`sweep_orders` then
propagates the initial ansatz with the reference solver for one ``eps`` and
compares it with the ansatz at the final time for every order ``N``.
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .ansatz import Ansatz, make_cutoff
from .classical_flow import Trajectory
from .classical_flow import propagate as flow_propagate
from .electronic import ElectronicModel, make_model
from .expansion import Expansion, ExpansionSettings, WGrid, expand
from .reference import (GridSpec, GridState, check_resolution, duhamel_residual, error_norm,
                        propagate_checked)
from .wavepacket import WavepacketParams

__all__ = [
    "Scenario",
    "Prepared",
    "OrderSweep",
    "SweepResult",
    "optimal_N",
    "prepare",
    "auto_grid",
    "sweep_orders",
    "sweep_epsilon",
    "fit_sweeps",
    "fit_exponential",
    "fit_power_law",
    "fixed_order_slopes",
    "has_interior_minimum",
    "gaussian_tail_mass",
    "localization_sweep",
    "write_rows_csv",
]


def optimal_N(eps, g) -> int:
    """``floor(g^2 / eps^2)`` in exact rational arithmetic.

    Floats are converted exactly (``Fraction(0.1)`` is the binary value), so
    use strings or fractions for decimal inputs such as ``"0.1"``.
    """
    e, gg = Fraction(str(eps)) if isinstance(eps, float) else Fraction(eps), \
        Fraction(str(g)) if isinstance(g, float) else Fraction(g)
    if e <= 0 or gg <= 0:
        raise ValueError("eps and g must be positive")
    return math.floor(gg * gg / (e * e))


@dataclass
class Scenario:
    """Everything needed to run one truncation experiment (one nuclear dimension)."""

    name: str
    model: str
    model_params: dict
    c0: list
    a0: float
    eta0: float
    A0: complex = 1.0
    B0: complex = 1.0
    S0: float = 0.0
    T: float = 1.0
    eps_list: list = field(default_factory=lambda: [0.35, 0.3, 0.25, 0.2, 0.15])
    n_max: int = 6
    flow_dt: float = 1e-3
    w_half_width: float = 2.0
    w_step: float = 0.025
    w_ghost: int = 32
    nt: int = 401
    t_order: int = 8
    w_order: int = 16
    quad_order: int = 8
    b0: float = 1.4
    b1: float = 2.0
    dt_reference: float | None = None
    halving_tol: float = 1e-9
    max_halvings: int = 1
    box_margin: float = 1.0

    def build_model(self) -> ElectronicModel:
        return make_model(self.model, **self.model_params)

    def initial_params(self) -> WavepacketParams:
        return WavepacketParams(self.A0, self.B0, self.a0, self.eta0, self.S0)

    def settings(self) -> ExpansionSettings:
        return ExpansionSettings(self.n_max, self.nt, self.t_order, self.w_order, self.quad_order)

    def wgrid(self) -> WGrid:
        return WGrid(self.w_half_width, self.w_step, self.w_ghost)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["A0"], d["B0"] = [complex(self.A0).real, complex(self.A0).imag], [complex(self.B0).real,
                                                                          complex(self.B0).imag]
        return d


@dataclass
class Prepared:
    scenario: Scenario
    model: ElectronicModel
    trajectory: Trajectory
    expansion: Expansion
    seconds: float


def prepare(sc: Scenario, progress=None) -> Prepared:
    """Classical flow and coefficient fields for ``sc`` (independent of ``eps``)."""
    t0 = time.perf_counter()
    model = sc.build_model()
    traj = flow_propagate(sc.initial_params(), sc.T, sc.flow_dt, model)
    ex = expand(model, traj, sc.c0, sc.wgrid(), sc.settings(), T=sc.T, progress=progress)
    return Prepared(sc, model, traj, ex, time.perf_counter() - t0)


def auto_grid(ex: Expansion, eps: float, b1: float, margin: float = 1.0) -> GridSpec:
    """Smallest power-of-two grid that passes :func:`check_resolution` along the path."""
    nA = np.max(np.abs(ex.A))
    reach = max(b1, 10 * eps * nA) + margin
    lo, hi = float(np.min(ex.a)) - reach, float(np.max(ex.a)) + reach
    k_need = float(np.max(np.abs(ex.eta) / eps ** 2 + 8 * np.abs(ex.B) / eps))
    dx_need = min(eps / (4 * float(np.max(np.abs(ex.B)))), math.pi / k_need)
    nodes = 2 ** int(math.ceil(math.log2((hi - lo) / dx_need)))
    grid = GridSpec.interval(lo, hi, nodes, ex.n_el)
    check_resolution(grid, eps, ex.a[:, None], ex.eta[:, None], ex.A, ex.B, b1)
    return grid


@dataclass
class OrderSweep:
    """Error versus ``N`` at one ``eps``; ``floor`` is the solver error estimate per ``N``."""

    eps: float
    orders: list
    errors: list
    bounds: list
    floors: list
    norms: list
    grid: dict
    dt: float
    seconds: float
    series: dict | None = field(default=None, repr=False)

    @property
    def argmin(self) -> int:
        return int(self.orders[int(np.argmin(self.errors))])

    def at_floor(self, factor: float = 10.0) -> list:
        return [e <= factor * f for e, f in zip(self.errors, self.floors)]

    def series_rows(self, N: int) -> list:
        """Time series ``t, norm, error, residual, bound`` for order ``N``."""
        s = self.series or {}
        out = []
        for k, t in enumerate(s.get("t", [])):
            out.append({"t": float(t),
                        "norm": float(s["norm"][N, k]) if "norm" in s else float("nan"),
                        "error": float(s["error"][N, k]),
                        "residual": float(s["residual"][N, k]) if "residual" in s else float("nan"),
                        "bound": float(s["bound"][N, k]) if "bound" in s else float("nan")})
        return out

    def rows(self, scenario: str) -> list:
        return [{"scenario": scenario, "eps": self.eps, "N": N, "error": e, "bound": b, "floor": f,
                 "runtime": self.seconds}
                for N, e, b, f in zip(self.orders, self.errors, self.bounds, self.floors)]


def _order_values(values: np.ndarray, n_max: int) -> np.ndarray:
    """Map per-component values ``[par_0, perp_2, ..., perp_{n_max+2}]`` to order-``N`` sums."""
    cs = np.cumsum(values[1:], axis=0)
    return np.array([values[0] + cs[N] for N in range(n_max + 1)])


def sweep_orders(prep: Prepared, eps: float, n_max: int | None = None, residual: bool = True,
                 checkpoints: int = 10) -> OrderSweep:
    """Error ``||exact_N(T) - ansatz_N(T)||`` for ``N = 0..n_max`` at one ``eps``.

    ``exact_N`` is the reference propagation of the order-``N`` ansatz at
    ``t = 0``.  The initial ansatz is linear in its order pieces, and at
    ``t = 0`` the parallel pieces vanish beyond order zero, so one batched
    propagation of ``par_0, perp_2, ..., perp_{n_max+2}`` serves every ``N``.

    The error is also recorded at ``checkpoints`` equally spaced times (when
    they fall on expansion time nodes) and stored in ``series`` together with
    the residual norms, the accumulated residual bound and the ansatz norm.
    """
    sc, ex = prep.scenario, prep.expansion
    n_max = ex.settings.n_max if n_max is None else n_max
    t0 = time.perf_counter()
    grid = auto_grid(ex, eps, sc.b1, sc.box_margin)
    X = grid.points()[:, 0]
    an = Ansatz(ex, eps, make_cutoff(sc.b0, sc.b1))
    start = an.components(0.0, X)
    pieces = np.array([start.par[0]] + [start.perp[n] for n in range(2, n_max + 3)])
    psi0 = GridState(grid, pieces, 0.0, eps)
    dt = sc.T / 2 ** 14 if sc.dt_reference is None else sc.dt_reference
    combine = lambda v: _order_values(v, n_max)
    if checkpoints and (len(ex.t) - 1) % checkpoints:
        checkpoints = 0
    fin, floor, dt_used = propagate_checked(psi0, sc.T, prep.model, dt, sc.halving_tol, sc.max_halvings,
                                            combine, checkpoints)
    exact = combine(fin.values)
    end = an.components(sc.T, X)
    approx = np.array([end.assemble(N) for N in range(n_max + 1)])
    errs = error_norm(exact, approx, grid)
    series = {"t": [0.0], "error": [np.zeros(n_max + 1)]}
    if checkpoints:
        times, snaps = fin.meta["snapshots"]
        for tk, ref in zip(times, snaps):
            comp = an.components(float(tk), X)
            series["t"].append(float(tk))
            series["error"].append(error_norm(ref, np.array([comp.assemble(N) for N in range(n_max + 1)]),
                                              grid))
    series = {"t": np.array(series["t"]), "error": np.array(series["error"]).T}
    if residual:
        rep = duhamel_residual(an, grid, prep.model, orders=range(n_max + 1))
        bounds = [rep.final(N) for N in range(n_max + 1)]
        idx = np.rint((series["t"] - ex.t[0]) / ex.ht).astype(int)
        series.update(residual=rep.norms[:, idx], bound=rep.bound[:, idx], norm=rep.psi_norms[:, idx])
    else:
        bounds = [float("nan")] * (n_max + 1)
    norms = np.sqrt(grid.cell * np.sum(np.abs(approx) ** 2, axis=(-2, -1)))
    gd = {"lower": grid.lower[0], "upper": grid.upper[0], "nodes": grid.nodes}
    return OrderSweep(float(eps), list(range(n_max + 1)), [float(e) for e in errs], bounds,
                      [float(f) for f in floor], [float(v) for v in norms], gd, float(dt_used),
                      time.perf_counter() - t0, series)


@dataclass
class SweepResult:
    """All order sweeps of a scenario plus the fits."""

    scenario: str
    sweeps: list
    fit: dict | None = None
    slopes: dict | None = None

    def rows(self) -> list:
        out = []
        for s in sorted(self.sweeps, key=lambda s: -s.eps):
            out.extend(s.rows(self.scenario))
        return out

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "eps": [s.eps for s in self.sweeps],
            "argmin_N": [s.argmin for s in self.sweeps],
            "min_error": [min(s.errors) for s in self.sweeps],
            "g_estimate": [s.eps * math.sqrt(s.argmin) for s in self.sweeps],
            "interior_minimum": [has_interior_minimum(s) for s in self.sweeps],
            "exponential_fit": self.fit,
            "fixed_order_slopes": self.slopes,
        }


def fit_sweeps(name: str, sweeps, slope_orders=(1, 2, 3), floor_factor: float = 10.0) -> SweepResult:
    """Exponential fit of the minimal errors and fixed-order slopes.

    Only sweeps whose minimal error exceeds ``floor_factor`` times the solver
    floor enter the fit, and at least four are required.
    """
    sweeps = sorted(sweeps, key=lambda s: -s.eps)
    res = SweepResult(name, sweeps)
    usable = [(s.eps, min(s.errors)) for s in sweeps
              if min(s.errors) > floor_factor * s.floors[int(np.argmin(s.errors))]]
    if len(usable) >= 4:
        e, m = zip(*usable)
        C, G, r2, rss = fit_exponential(e, m)
        res.fit = {"C": C, "Gamma": G, "R2": r2, "rss": rss, "power_law": fit_power_law(e, m)}
    res.slopes = fixed_order_slopes(sweeps, slope_orders)
    return res


def sweep_epsilon(prep: Prepared, eps_list=None, n_max: int | None = None, residual: bool = True,
                  slope_orders=(1, 2, 3), progress=None, threads: int = 1) -> SweepResult:
    """Order sweeps over ``eps_list`` with the exponential and fixed-order fits.

    With ``threads > 1`` the ``eps`` values run concurrently; the results are
    merged in decreasing ``eps`` regardless of completion order.
    """
    sc = prep.scenario
    eps_list = sorted({float(e) for e in (sc.eps_list if eps_list is None else eps_list)}, reverse=True)

    def one(eps):
        s = sweep_orders(prep, eps, n_max, residual)
        if progress is not None:
            progress(s)
        return s

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            sweeps = list(pool.map(one, eps_list))
    else:
        sweeps = [one(e) for e in eps_list]
    return fit_sweeps(sc.name, sweeps, slope_orders)


def fit_exponential(eps, err) -> tuple:
    """Least squares ``log err = log C - Gamma / eps^2``; returns ``(C, Gamma, R^2, rss)``.

    Raises
    ------
    ValueError
        With fewer than two points or non-positive errors.
    """
    eps = np.asarray(eps, dtype=float)
    err = np.asarray(err, dtype=float)
    if len(eps) < 2 or np.any(err <= 0):
        raise ValueError("need at least two positive errors")
    x = 1.0 / eps ** 2
    y = np.log(err)
    slope, icpt = np.polyfit(x, y, 1)
    r = y - (icpt + slope * x)
    rss = float(np.sum(r ** 2))
    tss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return float(np.exp(icpt)), float(-slope), r2, rss


def fit_power_law(eps, err) -> dict:
    """Least squares ``log err = log C + p log eps``; returns ``{"C", "p", "R2", "rss"}``."""
    eps = np.asarray(eps, dtype=float)
    y = np.log(np.asarray(err, dtype=float))
    x = np.log(eps)
    p, icpt = np.polyfit(x, y, 1)
    r = y - (icpt + p * x)
    rss = float(np.sum(r ** 2))
    tss = float(np.sum((y - y.mean()) ** 2))
    return {"C": float(np.exp(icpt)), "p": float(p), "R2": 1.0 - rss / tss if tss > 0 else 1.0, "rss": rss}


def fixed_order_slopes(sweeps, orders=(1, 2, 3), eps_max: float = 0.35, eps_min: float = 0.2) -> dict:
    """Slope of ``log error`` against ``log eps`` per fixed ``N`` over ``eps_min <= eps <= eps_max``."""
    out = {}
    sel = [s for s in sweeps if eps_min - 1e-12 <= s.eps <= eps_max + 1e-12]
    for N in orders:
        pts = [(s.eps, s.errors[N]) for s in sel if N < len(s.errors) and s.errors[N] > 10 * s.floors[N]]
        if len(pts) >= 2:
            e, v = zip(*pts)
            out[N] = float(np.polyfit(np.log(e), np.log(v), 1)[0])
    return out


def has_interior_minimum(sweep: OrderSweep, rise: float = 0.05) -> bool:
    """True when the smallest error sits strictly inside ``0..N_max`` and both ends
    exceed it by the relative margin ``rise``."""
    e = np.asarray(sweep.errors)
    k = int(np.argmin(e))
    if k == 0 or k == len(e) - 1:
        return False
    return bool(e[0] > (1 + rise) * e[k] and e[-1] > (1 + rise) * e[k])


def gaussian_tail_mass(eps: float, b: float, A: complex) -> float:
    """``(int_{|w| > b} |phi_0|^2 dw)^{1/2}`` for the order-zero packet with ``hbar = eps^2``.

    ``|phi_0|^2`` is a normal density with variance ``eps^2 |A|^2 / 2``.
    """
    s = eps * abs(A) / math.sqrt(2.0)
    return math.sqrt(math.erfc(b / (math.sqrt(2.0) * s)))


def localization_sweep(prep: Prepared, b: float, eps_list, t: float | None = None, floor: float = 1e-14,
                       nodes: int | None = None) -> dict:
    """Order-zero mass outside ``|X - a(t)| > b`` over ``eps_list`` and its decay fit.

    Returns per-``eps`` masses, the Gaussian-tail oracle, and the slope of
    ``log mass`` against ``1/eps^2`` (``-gamma``) over masses above ``floor``.
    """
    sc, ex = prep.scenario, prep.expansion
    t = sc.T if t is None else float(t)
    if b >= sc.b1:
        raise ValueError("b must lie inside the cutoff radius b1")
    k = int(round((t - ex.t[0]) / ex.ht))
    A = complex(ex.A[k])
    rows = []
    for eps in eps_list:
        an = Ansatz(ex, eps, make_cutoff(sc.b0, sc.b1))
        a = an.center(t)
        n = nodes or 2 ** int(math.ceil(math.log2(2 * sc.b1 * 4 * abs(complex(ex.B[k])) / eps * 8)))
        X = np.linspace(a - sc.b1, a + sc.b1, n, endpoint=False)
        mass = an.localization_mass(t, X, b, 0)
        rows.append({"eps": float(eps), "mass": mass, "oracle": gaussian_tail_mass(eps, b, A)})
    good = [r for r in rows if r["mass"] > floor]
    slope = None
    if len(good) >= 2:
        x = [1 / r["eps"] ** 2 for r in good]
        y = [math.log(r["mass"]) for r in good]
        slope = float(np.polyfit(x, y, 1)[0])
    return {"b": b, "t": t, "rows": rows, "slope": slope, "gamma": None if slope is None else -slope}


def write_rows_csv(path, rows: list) -> None:
    """CSV with floats printed to 17 significant digits."""
    if not rows:
        raise ValueError("no rows to write")
    keys = list(rows[0])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(keys)
        for r in rows:
            wr.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in (r[k] for k in keys)])


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
