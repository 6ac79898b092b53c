"""Classical equations of motion for the packet parameters.

For an effective potential ``E`` the parameters evolve by

    a' = eta,   eta' = -grad E(a),   A' = i B,   B' = i Hess E(a) A,
    S' = |eta|^2 / 2 - E(a).

The compatibility conditions on ``(A, B)`` are conserved by this flow; they are
monitored, not enforced, so their drift is an honest accuracy diagnostic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .electronic import ElectronicModel, RegionError
from .wavepacket import WavepacketParams, cond1_defects

__all__ = [
    "FlowState",
    "Trajectory",
    "RegionExit",
    "InvariantError",
    "rhs",
    "propagate",
    "linearization_check",
]


class RegionExit(RuntimeError):
    """The classical position left the validity region before the final time."""

    def __init__(self, exit_time: float, trajectory: "Trajectory"):
        super().__init__(f"trajectory left the validity region at t = {exit_time:.12g}")
        self.exit_time = exit_time
        self.trajectory = trajectory


class InvariantError(RuntimeError):
    """The compatibility conditions drifted beyond the abort threshold."""


@dataclass(frozen=True)
class FlowState:
    t: float
    params: WavepacketParams


def rhs(state: FlowState | WavepacketParams, model: ElectronicModel):
    """Time derivatives ``(a', eta', A', B', S')`` at the given state."""
    p = state.params if isinstance(state, FlowState) else state
    if not model.region.contains(p.a):
        raise RegionError(f"position {p.a} outside the validity region")
    E, g, H = model.gradient_hessian(p.a)
    return p.eta.copy(), -g, 1j * p.B, 1j * (H @ p.A), 0.5 * float(p.eta @ p.eta) - E


def _pack(a, eta, A, B, S):
    return np.concatenate([a.astype(complex), eta.astype(complex), A.ravel(), B.ravel(), [S]])


def _unpack(y, d):
    a = y[:d].real
    eta = y[d : 2 * d].real
    A = y[2 * d : 2 * d + d * d].reshape(d, d)
    B = y[2 * d + d * d : 2 * d + 2 * d * d].reshape(d, d)
    return a, eta, A, B, y[-1].real


def _deriv(y, d, model):
    a, eta, A, B, S = _unpack(y, d)
    if not model.region.contains(a):
        raise RegionError("position outside the validity region")
    E, g, H = model.gradient_hessian(a)
    return _pack(eta, -g, 1j * B, 1j * (H @ A), 0.5 * float(eta @ eta) - E)


def _rk4(y, h, d, model):
    k1 = _deriv(y, d, model)
    k2 = _deriv(y + 0.5 * h * k1, d, model)
    k3 = _deriv(y + 0.5 * h * k2, d, model)
    k4 = _deriv(y + h * k3, d, model)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def _continue_sqrt(z: complex, prev: complex) -> complex:
    r = complex(np.sqrt(z))
    return r if abs(r - prev) <= abs(r + prev) else -r


@dataclass
class Trajectory:
    """Samples of the classical flow with cubic Hermite dense output.

    Arrays are indexed by sample: ``a`` and ``eta`` have shape ``(K, d)``,
    ``A`` and ``B`` shape ``(K, d, d)``; ``dy`` holds the packed time
    derivatives used for interpolation.
    """

    t: np.ndarray
    a: np.ndarray
    eta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    sqrt_det: np.ndarray
    energy: np.ndarray
    defects: np.ndarray
    dy: np.ndarray = field(repr=False)
    exit_time: float | None = None

    @property
    def d(self) -> int:
        return self.a.shape[1]

    @property
    def T(self) -> float:
        return float(self.t[-1])

    def max_defect(self) -> float:
        return float(np.max(self.defects))

    def energy_drift(self) -> float:
        return float(np.max(np.abs(self.energy - self.energy[0])))

    @cached_property
    def _packed(self) -> np.ndarray:
        return np.stack([_pack(self.a[i], self.eta[i], self.A[i], self.B[i], self.S[i])
                         for i in range(len(self.t))])

    def _locate(self, t: np.ndarray):
        t = np.asarray(t, dtype=float)
        tol = 1e-12 * max(1.0, abs(self.T))
        if np.any(t < self.t[0] - tol) or np.any(t > self.t[-1] + tol):
            raise ValueError("time outside the trajectory")
        k = np.clip(np.searchsorted(self.t, t, side="right") - 1, 0, len(self.t) - 2)
        return k

    def state(self, t):
        """Interpolated ``(a, eta, A, B, S, sqrt_det)`` at times ``t`` (array or scalar)."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        k = self._locate(t)
        d = self.d
        h = self.t[k + 1] - self.t[k]
        s = (t - self.t[k]) / h
        h00 = 2 * s ** 3 - 3 * s ** 2 + 1
        h10 = s ** 3 - 2 * s ** 2 + s
        h01 = -2 * s ** 3 + 3 * s ** 2
        h11 = s ** 3 - s ** 2
        Y = self._packed
        y = (h00[:, None] * Y[k] + (h10 * h)[:, None] * self.dy[k]
             + h01[:, None] * Y[k + 1] + (h11 * h)[:, None] * self.dy[k + 1])
        out = [_unpack(yi, d) for yi in y]
        a = np.array([o[0] for o in out])
        eta = np.array([o[1] for o in out])
        A = np.array([o[2] for o in out])
        B = np.array([o[3] for o in out])
        S = np.array([o[4] for o in out])
        sd = np.empty(len(t), dtype=complex)
        for i in range(len(t)):
            lo, hi = self.sqrt_det[k[i]], self.sqrt_det[k[i] + 1]
            guess = lo + s[i] * (hi - lo)
            sd[i] = _continue_sqrt(complex(np.linalg.det(A[i])), guess)
        if scalar:
            return a[0], eta[0], A[0], B[0], S[0], sd[0]
        return a, eta, A, B, S, sd

    def params(self, t: float, hbar: float) -> WavepacketParams:
        a, eta, A, B, S, sd = self.state(float(t))
        return WavepacketParams(A, B, a, eta, S, hbar, sqrt_det_A=sd)

    def write_csv(self, path) -> None:
        """Columns ``t, a_k, eta_k, Re/Im A_kl, Re/Im B_kl, S``."""
        d = self.d
        head = ["t"] + [f"a{k}" for k in range(d)] + [f"eta{k}" for k in range(d)]
        for M in ("A", "B"):
            for k in range(d):
                for l in range(d):
                    head += [f"Re{M}{k}{l}", f"Im{M}{k}{l}"]
        head.append("S")
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(head)
            for i in range(len(self.t)):
                row = [self.t[i], *self.a[i], *self.eta[i]]
                for M in (self.A[i], self.B[i]):
                    for z in M.ravel():
                        row += [z.real, z.imag]
                row.append(self.S[i])
                wr.writerow([f"{float(v):.17g}" for v in row])


def _initial_params(state0) -> tuple[float, WavepacketParams]:
    if isinstance(state0, FlowState):
        return float(state0.t), state0.params
    return 0.0, state0


def propagate(state0: FlowState | WavepacketParams, T: float, dt: float, model: ElectronicModel,
              abort_defect: float = 1e-6, on_exit: str = "raise") -> Trajectory:
    """Integrate the classical flow with fixed-step fourth-order Runge-Kutta.

    Samples are taken at multiples of ``dt`` plus the endpoint ``T`` (a
    negative ``T`` integrates backwards).  The compatibility defects are
    re-evaluated after every step.

    Raises
    ------
    RegionExit
        When ``a`` leaves the validity region (exit time located by
        bisection to ``1e-10``).  With ``on_exit="truncate"`` the partial
        trajectory is returned instead, with ``exit_time`` set.
    InvariantError
        When a compatibility defect exceeds ``abort_defect``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t0, p0 = _initial_params(state0)
    d = p0.d
    if not model.region.contains(p0.a):
        raise RegionError("initial position outside the validity region")
    sign = 1.0 if T >= 0 else -1.0
    n_full = int(math.floor(abs(T) / dt + 1e-9))
    steps = [dt] * n_full
    rest = abs(T) - n_full * dt
    if rest > 1e-12 * max(1.0, abs(T)):
        steps.append(rest)
    y = _pack(p0.a, p0.eta, p0.A, p0.B, p0.S)
    ts, ys = [t0], [y]
    sq = [p0.sqrt_det]
    exit_time = None
    t = t0
    for h in steps:
        hs = sign * h
        try:
            y_new = _rk4(y, hs, d, model)
            inside = model.region.contains(_unpack(y_new, d)[0])
        except RegionError:
            inside = False
        if not inside:
            lo, hi = 0.0, h
            while hi - lo > 1e-10:
                mid = 0.5 * (lo + hi)
                try:
                    ok = model.region.contains(_unpack(_rk4(y, sign * mid, d, model), d)[0])
                except RegionError:
                    ok = False
                lo, hi = (mid, hi) if ok else (lo, mid)
            exit_time = t + sign * lo
            break
        y = y_new
        t = t + hs
        ts.append(t)
        ys.append(y)
        a, eta, A, B, S = _unpack(y, d)
        sq.append(_continue_sqrt(complex(np.linalg.det(A)), sq[-1]))
        dmax = max(cond1_defects(A, B))
        if dmax > abort_defect:
            raise InvariantError(f"compatibility defect {dmax:.3e} at t = {t:.6g}")
    traj = _build(np.array(ts), ys, np.array(sq), d, model, exit_time)
    if exit_time is not None and on_exit == "raise":
        raise RegionExit(exit_time, traj)
    return traj


def _build(ts, ys, sq, d, model, exit_time) -> Trajectory:
    parts = [_unpack(y, d) for y in ys]
    a = np.array([p[0] for p in parts])
    eta = np.array([p[1] for p in parts])
    A = np.array([p[2] for p in parts])
    B = np.array([p[3] for p in parts])
    S = np.array([p[4] for p in parts])
    dy = np.array([_deriv(y, d, model) for y in ys])
    Epot = np.array([model.gradient_hessian(ai)[0] for ai in a])
    energy = 0.5 * np.sum(eta ** 2, axis=1) + Epot
    defects = np.array([max(cond1_defects(A[i], B[i])) for i in range(len(ts))])
    return Trajectory(ts, a, eta, A, B, S, sq, energy, defects, dy, exit_time)


def linearization_check(traj: Trajectory, model: ElectronicModel, h: float = 1e-4) -> float:
    """Compare ``A(t), B(t)`` with finite-difference Jacobians of the flow.

    With ``J_x = d(a, eta)(t) / d(a, eta)(0)`` from central differences of
    step ``h``, the linearized flow predicts

        A(t) = (da/da0) A(0) + i (da/deta0) B(0),
        B(t) = -i [(deta/da0) A(0) + i (deta/deta0) B(0)],

    since ``(A, i B)`` is a solution of the linearized equations.

    Returns the largest deviation over all samples.
    """
    d = traj.d
    T = traj.T - traj.t[0]
    dt = float(traj.t[1] - traj.t[0]) if len(traj.t) > 1 else T
    base = WavepacketParams(traj.A[0], traj.B[0], traj.a[0], traj.eta[0], traj.S[0])
    Ja = np.zeros((len(traj.t), 2 * d, d))
    Je = np.zeros((len(traj.t), 2 * d, d))
    for k in range(d):
        for which, J in (("a", Ja), ("eta", Je)):
            res = []
            for sgn in (1.0, -1.0):
                shift = np.zeros(d)
                shift[k] = sgn * h
                p = base.with_(**{which: getattr(base, which) + shift})
                tr = propagate(FlowState(traj.t[0], p), T, dt, model)
                res.append(np.concatenate([tr.a, tr.eta], axis=1))
            J[:, :, k] = (res[0] - res[1]) / (2 * h)
    A0, B0 = traj.A[0], traj.B[0]
    predA = Ja[:, :d] @ A0 + 1j * Je[:, :d] @ B0
    predB = -1j * (Ja[:, d:] @ A0 + 1j * Je[:, d:] @ B0)
    return float(max(np.max(np.abs(predA - traj.A)), np.max(np.abs(predB - traj.B))))
