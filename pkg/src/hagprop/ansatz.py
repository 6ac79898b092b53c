"""Assembly of the cutoff-localized approximate solution on a nuclear grid.

The order-``N`` approximation is

    F(w) exp(i S / eps^2) sum_j phi_j(A, B, eps^2, a, eta, X)
        [ sum_{n <= N} eps^n c_{n,j}(w, t) Phi(w, t)
          + sum_{2 <= n <= N+2} eps^n d_{n,j}(w, t) ],     w = X - a(t),

where the packets with ``hbar = eps^2`` absorb the ``eps^{-1/2}`` normalization of
the ``y = w / eps`` scaling.  Since the coefficient fields do not depend on
``eps`` and all orders enter linearly, the evaluator returns the individual
order contributions and callers sum the ones they need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._numerics import interp_along
from .expansion import Expansion
from .multiindex import MultiIndexTable
from .wavepacket import WavepacketParams, evaluate_basis

__all__ = ["CutoffF", "make_cutoff", "Ansatz", "OrderComponents"]


def _rho(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    pos = u > 0
    out[pos] = np.exp(-1.0 / u[pos])
    return out


@dataclass(frozen=True)
class CutoffF:
    """Smooth radial cutoff: 1 for ``|w| <= b0``, 0 for ``|w| >= b1``."""

    b0: float
    b1: float

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        r = np.abs(w) if w.ndim == 0 or w.shape[-1:] != (1,) else np.linalg.norm(w, axis=-1)
        u = (r - self.b0) / (self.b1 - self.b0)
        up = np.clip(u, 0.0, 1.0)
        num = _rho(1.0 - up)
        return num / (num + _rho(up))


def make_cutoff(b0: float, b1: float) -> CutoffF:
    """Cutoff built from the smoothed step ``rho(u) / (rho(u) + rho(1 - u))``, ``rho(u) = exp(-1/u)``."""
    if not 0 < b0 < b1:
        raise ValueError(f"need 0 < b0 < b1, got b0={b0}, b1={b1}")
    return CutoffF(float(b0), float(b1))


@dataclass
class OrderComponents:
    """Order contributions on a set of nodes at one time.

    ``par[n]`` holds ``eps^n F c_n Phi`` (``n = 0..n_max``) and ``perp[n]`` holds
    ``eps^n F d_n`` (``n = 2..n_max+2``), each with shape ``(Nx, n_el)`` and the
    common phase ``exp(i S / eps^2)`` included.
    """

    t: float
    par: list
    perp: list

    def assemble(self, N: int) -> np.ndarray:
        """Order-``N`` approximation: parallel orders ``<= N``, perpendicular ``<= N + 2``."""
        out = sum(self.par[n] for n in range(N + 1))
        for n in range(2, N + 3):
            if n < len(self.perp) and self.perp[n] is not None:
                out = out + self.perp[n]
        return out

    def parallel(self, N: int) -> np.ndarray:
        return sum(self.par[n] for n in range(N + 1))

    def perpendicular(self, N: int) -> np.ndarray:
        out = np.zeros_like(self.par[0])
        for n in range(2, N + 3):
            if n < len(self.perp) and self.perp[n] is not None:
                out = out + self.perp[n]
        return out


class Ansatz:
    """Evaluator of the approximate solution for one ``eps``.

    Parameters
    ----------
    expansion : Expansion
        Coefficient fields (independent of ``eps``).
    eps : float
    cutoff : CutoffF
        Must satisfy ``cutoff.b1 <= expansion.grid.b1``.
    interp_points : int
        Lagrange stencil size for interpolating fields in ``w`` and ``t``.
    """

    def __init__(self, expansion: Expansion, eps: float, cutoff: CutoffF, interp_points: int = 8):
        if cutoff.b1 > expansion.grid.b1 + 1e-12:
            raise ValueError("cutoff radius b1 exceeds the expansion grid")
        self.exp = expansion
        self.eps = float(eps)
        self.cutoff = cutoff
        self.npts = interp_points
        self.n_max = expansion.settings.n_max
        kmax = max(v.shape[2] for v in expansion.c + [d for d in expansion.d if d is not None])
        self.table = MultiIndexTable(1, kmax - 1)

    @property
    def N_max(self) -> int:
        return self.n_max

    def _geometry(self, t: float):
        ex = self.exp
        k = (t - ex.t[0]) / ex.ht
        if t < ex.t[0] - 1e-12 or t > ex.t[-1] + 1e-12:
            raise ValueError(f"time {t} outside the expansion interval")
        node = int(round(k)) if abs(k - round(k)) < 1e-9 else None
        return node

    def _fields_at(self, t: float, node):
        ex = self.exp
        def pick(arr):
            if arr is None:
                return None
            if node is not None:
                return np.asarray(arr[node])
            return interp_along(np.asarray(arr), 0, ex.t[0], ex.ht, [t], self.npts)[0]
        phi = pick(ex.phi.phi)
        V_par = [pick(c) for c in ex.c]
        V_perp = [pick(d) for d in ex.d]
        return phi, V_par, V_perp

    def components(self, t: float, X) -> OrderComponents:
        """Order contributions at time ``t`` on the nodes ``X`` (shape ``(Nx,)`` or ``(Nx, 1)``)."""
        ex = self.exp
        X = np.asarray(X, dtype=float).reshape(-1)
        node = self._geometry(t)
        if node is not None:
            a, eta, A, B, S, sd = (ex.a[node], ex.eta[node], ex.A[node], ex.B[node], ex.S[node],
                                   ex.sqrt_det[node])
        else:
            if ex.trajectory is None:
                raise ValueError("off-grid times need the trajectory")
            a, eta, A, B, S, sd = ex.trajectory.state(float(t))
            a, eta, A, B = float(a[0]), float(eta[0]), complex(A[0, 0]), complex(B[0, 0])
        params = WavepacketParams(A, B, a, eta, S, self.eps ** 2, sqrt_det_A=sd)
        w = X - a
        sel = np.abs(w) < self.cutoff.b1
        n_el = ex.n_el
        zero = np.zeros((len(X), n_el), dtype=complex)
        phi, Vc, Vd = self._fields_at(t, node)
        par = [zero.copy() for _ in Vc]
        perp = [None if v is None else zero.copy() for v in Vd]
        if np.any(sel):
            ws = w[sel]
            F = self.cutoff(ws)
            basis = evaluate_basis(params, self.table, X[sel][:, None])
            phase = np.exp(1j * S / self.eps ** 2)
            g = ex.grid
            phi_q = interp_along(phi, 0, g.w[0], g.h, ws, self.npts)
            for n, c in enumerate(Vc):
                cq = interp_along(c, 0, g.w[0], g.h, ws, self.npts)
                amp = np.sum(basis[:, : cq.shape[1]] * cq, axis=1)
                par[n][sel] = (self.eps ** n * phase * F * amp)[:, None] * phi_q
            for n, dn in enumerate(Vd):
                if dn is None:
                    continue
                dq = interp_along(dn, 0, g.w[0], g.h, ws, self.npts)
                amp = np.einsum("xj,xja->xa", basis[:, : dq.shape[1]], dq)
                perp[n][sel] = (self.eps ** n * phase * F)[:, None] * amp
        return OrderComponents(float(t), par, perp)

    def evaluate(self, t: float, X, N: int) -> np.ndarray:
        """Order-``N`` approximation at time ``t`` on nodes ``X``; shape ``(Nx, n_el)``."""
        if not 0 <= N <= self.n_max:
            raise ValueError(f"order {N} not available (computed up to {self.n_max})")
        return self.components(t, X).assemble(N)

    def center(self, t: float) -> float:
        node = self._geometry(t)
        if node is not None:
            return float(self.exp.a[node])
        return float(self.exp.trajectory.state(float(t))[0][0])

    def localization_mass(self, t: float, X, b: float, N: int = 0) -> float:
        """``(int_{|X - a(t)| > b} ||psi||^2 dX)^{1/2}`` by the rectangle rule on uniform ``X``.

        Nodes with ``|X - a| = b`` are counted, so ``b = 0`` gives the full norm.
        """
        X = np.asarray(X, dtype=float).reshape(-1)
        psi = self.evaluate(t, X, N)
        a = self.center(t)
        h = X[1] - X[0]
        out = np.abs(X - a) >= b
        return float(np.sqrt(h * np.sum(np.abs(psi[out]) ** 2)))

