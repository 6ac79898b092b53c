"""Split-operator reference solver for the molecular Schroedinger equation

    i eps^2 d_t psi = -(eps^4 / 2) Laplace psi + h(X) psi

on a periodic nuclear grid with ``n_el`` electronic components per node.

Propagation uses Strang splitting: a half step with the exact matrix
exponential of ``h`` at every node, a kinetic step with the multiplier
``exp(-i dt eps^2 |k|^2 / 2)`` in Fourier space, and another potential half
step.  Consecutive potential half steps are merged.  Several states can be
propagated together; leading axes of ``values`` are treated as a batch.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import _stencil_bounds, cumulative_along, fd_weights
from .electronic import ElectronicModel

__all__ = [
    "GridSpec",
    "GridState",
    "ResolutionError",
    "GridMismatchError",
    "StepHalvingError",
    "SplitStepPropagator",
    "propagate",
    "propagate_checked",
    "error_norm",
    "check_resolution",
    "apply_hamiltonian",
    "DuhamelReport",
    "duhamel_residual",
]

_MAGIC = b"HAGGRID\n"


class ResolutionError(RuntimeError):
    """The grid does not resolve the wave packet or does not contain it."""


class GridMismatchError(ValueError):
    """Two grid states live on different grids."""


class StepHalvingError(RuntimeError):
    """Step halving did not reach the requested agreement."""


@dataclass(frozen=True)
class GridSpec:
    """Periodic tensor grid ``[lower, upper)^d`` with ``nodes`` points per axis."""

    lower: tuple
    upper: tuple
    nodes: int
    n_el: int

    def __post_init__(self):
        if self.nodes < 2 or self.nodes & (self.nodes - 1):
            raise ValueError(f"nodes per dimension must be a power of two, got {self.nodes}")
        if len(self.lower) != len(self.upper) or any(u <= l for l, u in zip(self.lower, self.upper)):
            raise ValueError("box must satisfy lower < upper in every dimension")

    @classmethod
    def interval(cls, x_min: float, x_max: float, nodes: int, n_el: int) -> "GridSpec":
        return cls((float(x_min),), (float(x_max),), int(nodes), int(n_el))

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def h(self) -> np.ndarray:
        return (np.array(self.upper) - np.array(self.lower)) / self.nodes

    @property
    def cell(self) -> float:
        return float(np.prod(self.h))

    @property
    def shape(self) -> tuple:
        return (self.nodes,) * self.d

    def axes(self) -> list:
        return [l + h * np.arange(self.nodes) for l, h in zip(self.lower, self.h)]

    def points(self) -> np.ndarray:
        """Node coordinates in node-major (C) order, shape ``(nodes^d, d)``."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def k2(self) -> np.ndarray:
        """``|k|^2`` on the FFT frequency grid, shape ``(nodes,)*d``."""
        ks = [2 * np.pi * np.fft.fftfreq(self.nodes, d=h) for h in self.h]
        mesh = np.meshgrid(*ks, indexing="ij")
        return sum(k * k for k in mesh)

    def k_max(self) -> float:
        return float(np.pi / np.max(self.h))


@dataclass
class GridState:
    """Samples of a wave function; ``values`` has shape ``(..., nodes^d, n_el)``."""

    grid: GridSpec
    values: np.ndarray
    t: float = 0.0
    eps: float = 1.0
    meta: dict = field(default_factory=dict)

    def norm(self) -> np.ndarray:
        """Grid ``L^2`` norm over nodes and electronic components (per batch entry)."""
        return np.sqrt(self.grid.cell * np.sum(np.abs(self.values) ** 2, axis=(-2, -1)))

    def dump(self, path) -> None:
        """Binary format: magic line, JSON header line, node-major little-endian complex128."""
        v = np.ascontiguousarray(self.values, dtype="<c16")
        head = {
            "format": "hagprop-grid", "version": 1, "d": self.grid.d, "n_el": self.grid.n_el,
            "lower": list(self.grid.lower), "upper": list(self.grid.upper), "nodes": self.grid.nodes,
            "t": self.t, "eps": self.eps, "shape": list(v.shape),
        }
        with open(path, "wb") as fh:
            fh.write(_MAGIC)
            fh.write((json.dumps(head) + "\n").encode())
            fh.write(v.tobytes())

    @classmethod
    def load(cls, path) -> "GridState":
        with open(path, "rb") as fh:
            if fh.readline() != _MAGIC:
                raise ValueError(f"{path} is not a grid-state file")
            head = json.loads(fh.readline())
            data = np.frombuffer(fh.read(), dtype="<c16").reshape(head["shape"]).copy()
        grid = GridSpec(tuple(head["lower"]), tuple(head["upper"]), head["nodes"], head["n_el"])
        return cls(grid, data, head["t"], head["eps"])


def check_resolution(grid: GridSpec, eps: float, a, eta, A, B, b1: float = 0.0) -> dict:
    """Check that the grid resolves and contains a packet along a sampled path.

    ``a, eta`` have shape ``(K, d)`` and ``A, B`` shape ``(K, d, d)``.  Requires

    * ``dx <= eps min_t 1/||B(t)|| / 4``,
    * ``k_max >= max_t (|eta| / eps^2 + 8 ||B|| / eps)`` so the carrier is resolved,
    * the box contains ``a(t) +- max(10 eps ||A||, b1)`` with one cell to spare.

    Returns the margins; raises :class:`ResolutionError` on violation.
    """
    a = np.asarray(a, dtype=float).reshape(len(a), -1)
    eta = np.asarray(eta, dtype=float).reshape(len(eta), -1)
    nA = np.linalg.norm(np.asarray(A).reshape(len(a), grid.d, grid.d), 2, axis=(1, 2))
    nB = np.linalg.norm(np.asarray(B).reshape(len(a), grid.d, grid.d), 2, axis=(1, 2))
    dx = float(np.max(grid.h))
    dx_need = eps * float(np.min(1.0 / nB)) / 4
    k_need = float(np.max(np.linalg.norm(eta, axis=1) / eps ** 2 + 8 * nB / eps))
    reach = np.maximum(10 * eps * nA, b1)[:, None]
    lo = np.min(a - reach, axis=0) - grid.h
    hi = np.max(a + reach, axis=0) + grid.h
    out = {"dx": dx, "dx_required": dx_need, "k_max": grid.k_max(), "k_required": k_need,
           "box_lower_needed": lo.tolist(), "box_upper_needed": hi.tolist()}
    problems = []
    if dx > dx_need:
        problems.append(f"spacing {dx:.3g} exceeds {dx_need:.3g}")
    if grid.k_max() < k_need:
        problems.append(f"k_max {grid.k_max():.4g} below carrier requirement {k_need:.4g}")
    if np.any(lo < np.array(grid.lower)) or np.any(hi > np.array(grid.upper)):
        problems.append(f"box {grid.lower}..{grid.upper} does not contain {lo.tolist()}..{hi.tolist()}")
    if problems:
        raise ResolutionError("; ".join(problems))
    return out


class SplitStepPropagator:
    """Strang splitting with a fixed step ``dt`` for a time-independent ``h``.

    The potential exponential ``exp(-i tau h(X) / eps^2)`` is built once per node
    from the eigendecomposition of ``h``.
    """

    def __init__(self, grid: GridSpec, model: ElectronicModel, eps: float, dt: float):
        if model.n_el != grid.n_el or model.d != grid.d:
            raise GridMismatchError("model and grid disagree on dimensions")
        self.grid, self.eps, self.dt = grid, float(eps), float(dt)
        H = model.hamiltonian(grid.points())
        lam, U = np.linalg.eigh(H)
        self._lam, self._U = lam, U
        self.half = self._expm(0.5 * dt)
        self.full = self._expm(dt)
        self.kinetic = np.exp(-0.5j * dt * eps ** 2 * grid.k2())

    def _expm(self, tau: float) -> np.ndarray:
        ph = np.exp(-1j * tau * self._lam / self.eps ** 2)
        return np.einsum("xab,xb,xcb->xac", self._U, ph, self._U.conj())

    @staticmethod
    def _apply(M, v):
        return np.matmul(M, v[..., None])[..., 0]

    def _kin(self, v):
        g = self.grid
        lead = v.shape[:-2]
        f = v.reshape(lead + g.shape + (g.n_el,))
        axes = tuple(range(len(lead), len(lead) + g.d))
        f = np.fft.ifftn(self.kinetic[..., None] * np.fft.fftn(f, axes=axes), axes=axes)
        return f.reshape(v.shape)

    def run(self, values: np.ndarray, steps: int, record=(), on_record=None) -> np.ndarray:
        """Take ``steps`` steps; after each step count in ``record`` call ``on_record(k, v)``."""
        record = set(record)
        v = self._apply(self.half, np.asarray(values, dtype=complex))
        for k in range(1, steps + 1):
            v = self._kin(v)
            if k == steps:
                v = self._apply(self.half, v)
            else:
                if k in record and on_record is not None:
                    on_record(k, self._apply(self.half, v))
                v = self._apply(self.full, v)
        if steps in record and on_record is not None:
            on_record(steps, v)
        return v


def propagate(psi0: GridState, T: float, dt: float, model: ElectronicModel,
              snapshots: int = 0, combine=None) -> GridState:
    """Propagate ``psi0`` over ``[t0, t0 + T]`` with Strang steps of size ``<= dt``.

    With ``snapshots = k`` the state (mapped through ``combine`` if given) is
    also stored at ``k`` equally spaced times after ``t0``; they are returned in
    ``meta["snapshots"]`` as ``(times, values)``.

    Raises
    ------
    RuntimeError
        If the norm drifts by more than ``1e-10`` (relative).
    """
    steps = max(1, int(math.ceil(T / dt - 1e-9)))
    if snapshots:
        steps = snapshots * int(math.ceil(steps / snapshots))
    prop = SplitStepPropagator(psi0.grid, model, psi0.eps, T / steps)
    combine = (lambda v: v) if combine is None else combine
    rec_k, rec_v = [], []
    marks = [steps * (i + 1) // snapshots for i in range(snapshots)] if snapshots else []
    on_record = lambda k, v: (rec_k.append(k), rec_v.append(combine(v)))
    v = prop.run(psi0.values, steps, marks, on_record)
    out = GridState(psi0.grid, v, psi0.t + T, psi0.eps, {"dt": T / steps, "steps": steps})
    if snapshots:
        out.meta["snapshots"] = (psi0.t + np.array(rec_k) * (T / steps), np.array(rec_v))
    n0, n1 = psi0.norm(), out.norm()
    drift = np.max(np.abs(n1 - n0) / np.maximum(n0, 1e-300))
    if drift > 1e-10:
        raise RuntimeError(f"norm drift {drift:.3g} exceeds 1e-10")
    return out


def propagate_checked(psi0: GridState, T: float, model: ElectronicModel, dt: float | None = None,
                      tol: float = 1e-9, max_halvings: int = 3, combine=None, snapshots: int = 0):
    """Propagate with step halving and estimate the time-stepping error.

    Runs with ``dt`` (default ``T / 2^14``) and ``dt / 2``; while the two
    disagree by more than ``tol`` the step is halved again, at most
    ``max_halvings`` times.  ``combine`` maps the batched values to the
    quantities whose disagreement is measured (default: identity).

    Returns ``(state, floor, dt)`` where ``state`` is the finer result and
    ``floor = |psi_dt - psi_dt/2| / 3`` (Richardson estimate for a second-order
    method) per entry of ``combine``'s leading axes.  The caller may treat
    ``floor > tol`` as a warning; the estimate is reported either way.
    ``snapshots`` is passed to :func:`propagate` for the finer run.
    """
    dt = T / 2 ** 14 if dt is None else float(dt)
    combine = (lambda v: v) if combine is None else combine
    coarse = propagate(psi0, T, dt, model, snapshots, combine)
    floor = None
    for _ in range(max_halvings + 1):
        dt /= 2
        fine = propagate(psi0, T, dt, model, snapshots, combine)
        diff = combine(fine.values) - combine(coarse.values)
        floor = np.sqrt(psi0.grid.cell * np.sum(np.abs(diff) ** 2, axis=(-2, -1))) / 3
        if np.all(floor <= tol):
            break
        coarse = fine
    fine.meta["floor"] = floor
    return fine, floor, dt


def error_norm(exact: GridState | np.ndarray, approx: GridState | np.ndarray, grid: GridSpec | None = None):
    """Grid ``L^2`` norm of the difference, summed over electronic components."""
    if isinstance(exact, GridState) and isinstance(approx, GridState):
        if exact.grid != approx.grid:
            raise GridMismatchError("states live on different grids")
        grid, u, v = exact.grid, exact.values, approx.values
    else:
        if grid is None:
            raise ValueError("raw arrays need an explicit grid")
        u = exact.values if isinstance(exact, GridState) else np.asarray(exact)
        v = approx.values if isinstance(approx, GridState) else np.asarray(approx)
    if u.shape != v.shape:
        raise GridMismatchError(f"shapes differ: {u.shape} vs {v.shape}")
    return np.sqrt(grid.cell * np.sum(np.abs(u - v) ** 2, axis=(-2, -1)))


def apply_hamiltonian(grid: GridSpec, H: np.ndarray, eps: float, v: np.ndarray) -> np.ndarray:
    """``-(eps^4/2) Laplace v + h v`` with a spectral Laplacian; ``H`` is ``h`` at the nodes."""
    lead = v.shape[:-2]
    f = v.reshape(lead + grid.shape + (grid.n_el,))
    axes = tuple(range(len(lead), len(lead) + grid.d))
    lap = np.fft.ifftn(-grid.k2()[..., None] * np.fft.fftn(f, axes=axes), axes=axes).reshape(v.shape)
    return -0.5 * eps ** 4 * lap + np.matmul(H, v[..., None])[..., 0]


@dataclass
class DuhamelReport:
    """Residual norms ``||xi_N(t)||`` on the time nodes and the accumulated bound.

    ``norms`` and ``bound`` have shape ``(len(orders), len(t))``; ``bound[:, -1]``
    is ``int_0^T ||xi_N|| dt / eps^2``.
    """

    t: np.ndarray
    orders: list
    norms: np.ndarray
    bound: np.ndarray
    psi_norms: np.ndarray

    def final(self, N: int) -> float:
        return float(self.bound[self.orders.index(N), -1])


def duhamel_residual(ansatz, grid: GridSpec, model: ElectronicModel, orders=None,
                     t_order: int = 8, quad_order: int = 4) -> DuhamelReport:
    """Residual ``xi = i eps^2 d_t Psi - H Psi`` of the assembled ansatz.

    The time derivative is taken from the demodulated field
    ``Psi~ = exp(-i Theta) Psi`` with ``Theta = (S + eta (X - a)) / eps^2``, which
    varies on the ``O(1)`` scale.  Using ``eps^2 d_t Theta = -eta^2/2 - E(a) - E'(a)(X - a)``,

        i eps^2 d_t Psi = exp(i Theta) [i eps^2 d_t Psi~ + (eta^2/2 + E(a) + E'(a)(X - a)) Psi~].

    Derivatives use finite differences of order ``t_order`` over the expansion's
    time nodes, evaluated in a sliding window.  The Laplacian is spectral.
    """
    ex = ansatz.exp
    eps = ansatz.eps
    X = grid.points()[:, 0]
    H = model.hamiltonian(grid.points())
    orders = list(range(ansatz.n_max + 1)) if orders is None else list(orders)
    t = ex.t
    nt = len(t)
    ht = ex.ht
    width = t_order + 1
    cache: dict = {}

    def stack(i):
        if i not in cache:
            comp = ansatz.components(t[i], X)
            par = np.array(comp.par)
            perp = np.array([np.zeros_like(par[0]) if p is None else p for p in comp.perp])
            # cumulative sums turn per-order pieces into the order-N ansatz
            full = np.cumsum(par, axis=0)
            pc = np.cumsum(perp, axis=0)
            full = full + pc[np.arange(len(par)) + 2]
            theta = (ex.S[i] + ex.eta[i] * (X - ex.a[i])) / eps ** 2
            cache[i] = (full[orders], np.exp(-1j * theta)[:, None])
        return cache[i]

    norms = np.empty((len(orders), nt))
    psi_norms = np.empty((len(orders), nt))
    for i in range(nt):
        lo, hi = _stencil_bounds(i, nt, width)
        for k in [k for k in cache if k < lo]:
            del cache[k]
        wts = fd_weights(float(i), np.arange(lo, hi, dtype=float), 1)[1] / ht
        dtil = sum(wts[k - lo] * stack(k)[0] * stack(k)[1] for k in range(lo, hi))
        psi, demod = stack(i)
        E, g, _ = model.gradient_hessian(ex.a[i])
        drift = 0.5 * ex.eta[i] ** 2 + float(E) + float(np.ravel(g)[0]) * (X - ex.a[i])
        lhs = (1j * eps ** 2 * dtil + drift[:, None] * psi * demod) / demod
        xi = lhs - apply_hamiltonian(grid, H, eps, psi)
        norms[:, i] = np.sqrt(grid.cell * np.sum(np.abs(xi) ** 2, axis=(-2, -1)))
        psi_norms[:, i] = np.sqrt(grid.cell * np.sum(np.abs(psi) ** 2, axis=(-2, -1)))
    bound = cumulative_along(norms, ht, axis=1, order=quad_order) / eps ** 2
    return DuhamelReport(t, orders, norms, bound, psi_norms)
