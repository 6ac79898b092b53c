"""Finite-dimensional electronic Hamiltonians ``h(X)`` and their spectral data.

A model supplies a Hermitian matrix ``h(X)`` that depends analytically on the
nuclear position ``X``, and selects one isolated eigenvalue ``E(X)``.  Besides
the eigenpair itself the propagation needs

* Taylor coefficients of ``E`` at the classical position (Cauchy integrals on
  small complex circles, which is why every model accepts complex ``X``),
* a smooth eigenvector field ``Phi(w, t)`` along the trajectory whose phase
  obeys ``<Phi, d_t Phi> = 0``,
* the reduced resolvent ``r = (h - E)^{-1}`` on the orthogonal complement.

Positions are arrays of shape ``(..., d)``; for ``d = 1`` a trailing axis of
length one may be omitted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._numerics import cumulative_along, taylor_coefficients, taylor_coefficients_nd

__all__ = [
    "NearDegeneracyError",
    "RegionError",
    "Region",
    "ElectronicModel",
    "DiagonalModel",
    "TwoLevelModel",
    "MatrixModel",
    "PhiField",
    "phase_fix",
    "catalog",
    "make_model",
]


class NearDegeneracyError(RuntimeError):
    """The selected eigenvalue comes closer than the gap threshold to another one."""


class RegionError(ValueError):
    """A position lies outside the model's validity region."""


@dataclass(frozen=True)
class Region:
    """Axis-aligned box ``lower <= X <= upper`` (entries may be infinite)."""

    lower: np.ndarray
    upper: np.ndarray

    @classmethod
    def whole(cls, d: int) -> "Region":
        return cls(np.full(d, -np.inf), np.full(d, np.inf))

    def contains(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.all((X >= self.lower) & (X <= self.upper), axis=-1)

    def distance(self, X) -> np.ndarray:
        """Distance to the boundary (positive inside, negative outside)."""
        X = np.asarray(X, dtype=float)
        return np.min(np.minimum(X - self.lower, self.upper - X), axis=-1)


def _points(X, d: int) -> np.ndarray:
    X = np.asarray(X)
    if d == 1 and (X.ndim == 0 or X.shape[-1] != 1):
        X = X[..., None]
    if X.shape[-1] != d:
        raise ValueError(f"expected positions with trailing dimension {d}, got shape {X.shape}")
    return X


class ElectronicModel:
    """Base class for analytic electronic Hamiltonians.

    Subclasses implement :meth:`hamiltonian`.  They may override
    :meth:`energy_continued` and :meth:`eigvec_continued` with closed forms;
    the defaults continue the selected eigenpair from a nearby real point by a
    non-Hermitian eigensolve.

    Parameters
    ----------
    d : int
        Nuclear dimension.
    n_el : int
        Electronic dimension.
    level : int
        Index of the selected eigenvalue in ascending order.
    region : Region, optional
        Validity region; the whole space by default.
    gap_threshold : float
        Smallest admissible distance from ``E`` to the rest of the spectrum.
    real_gauge : bool
        True when the continued eigenvector is real on the real axis, so the
        phase condition holds without any correction.
    """

    name = "model"

    def __init__(self, d: int, n_el: int, level: int = 0, region: Region | None = None,
                 gap_threshold: float = 1e-6, real_gauge: bool = False, taylor_order: int = 12):
        if n_el < 2:
            raise ValueError("electronic dimension must be at least 2")
        if not 0 <= level < n_el:
            raise ValueError(f"level {level} out of range for n_el={n_el}")
        self.d = d
        self.n_el = n_el
        self.level = level
        self.region = region if region is not None else Region.whole(d)
        self.gap_threshold = gap_threshold
        self.real_gauge = real_gauge
        self.taylor_order = taylor_order
        self.params: dict = {}

    # -- to be provided by subclasses -------------------------------------
    def hamiltonian(self, X) -> np.ndarray:
        raise NotImplementedError

    # -- spectral data on real points --------------------------------------
    def check_region(self, X) -> None:
        inside = self.region.contains(np.real(_points(X, self.d)))
        if not np.all(inside):
            raise RegionError("position outside the model's validity region")

    def levels(self, X):
        """All eigenvalues and eigenvectors of ``h(X)`` for real ``X`` (ascending)."""
        X = _points(np.asarray(X, dtype=float), self.d)
        return np.linalg.eigh(self.hamiltonian(X))

    def spectral(self, X):
        """``(E, Phi_raw, P_perp, gap)`` of the selected level at real ``X``.

        ``Phi_raw`` is the continued eigenvector, smooth in ``X`` with a
        model-dependent phase.  Raises :class:`NearDegeneracyError` when the
        gap drops below the threshold.
        """
        X = _points(np.asarray(X, dtype=float), self.d)
        self.check_region(X)
        vals, _ = self.levels(X)
        E = vals[..., self.level]
        others = np.delete(vals, self.level, axis=-1)
        gap = np.min(np.abs(others - E[..., None]), axis=-1)
        if np.any(gap < self.gap_threshold):
            raise NearDegeneracyError(f"spectral gap {np.min(gap):.3e} below threshold")
        phi = self.eigvec_continued(X.astype(complex))
        P = np.eye(self.n_el) - phi[..., :, None] * phi[..., None, :].conj()
        return E, phi, P, gap

    def energy(self, X) -> np.ndarray:
        X = _points(np.asarray(X, dtype=float), self.d)
        return self.levels(X)[0][..., self.level]

    def gap(self, X) -> np.ndarray:
        vals = self.levels(X)[0]
        E = vals[..., self.level]
        return np.min(np.abs(np.delete(vals, self.level, axis=-1) - E[..., None]), axis=-1)

    def resolvent(self, X) -> np.ndarray:
        """Matrix of the reduced resolvent ``r(X) = sum_{k != sel} v_k v_k^* / (E_k - E)``."""
        vals, vecs = self.levels(X)
        E = vals[..., self.level]
        gap = np.min(np.abs(np.delete(vals, self.level, axis=-1) - E[..., None]), axis=-1)
        if np.any(gap < self.gap_threshold):
            raise NearDegeneracyError(f"spectral gap {np.min(gap):.3e} below threshold")
        denom = vals - E[..., None]
        denom[..., self.level] = np.inf
        return np.einsum("...ik,...k,...jk->...ij", vecs, 1.0 / denom, vecs.conj())

    def reduced_resolvent_apply(self, X, v) -> np.ndarray:
        """``r(X) P_perp v``; the output is orthogonal to ``Phi(X)``."""
        return np.einsum("...ij,...j->...i", self.resolvent(X), np.asarray(v, dtype=complex))

    # -- analytic continuation ---------------------------------------------
    def energy_continued(self, Z, center) -> np.ndarray:
        """Selected eigenvalue of ``h(Z)`` for complex ``Z`` near the real ``center``."""
        Z = _points(np.asarray(Z, dtype=complex), self.d)
        center = _points(np.asarray(center, dtype=float), self.d)
        Eref = self.energy(center)
        vals = np.linalg.eigvals(self.hamiltonian(Z))
        Eref = np.broadcast_to(Eref, vals.shape[:-1])
        k = np.argmin(np.abs(vals - Eref[..., None]), axis=-1)
        return np.take_along_axis(vals, k[..., None], axis=-1)[..., 0]

    def reference_vector(self) -> np.ndarray:
        """Fixed vector used to normalize the generic continued eigenvector."""
        e = np.zeros(self.n_el, dtype=complex)
        e[self.level] = 1.0
        return e

    def eigvec_continued(self, Z) -> np.ndarray:
        """Analytic eigenvector field ``P(Z) e / sqrt(e^* P(Z) e)``.

        On the real axis this is a unit eigenvector whose phase is fixed by
        ``<e, Phi> > 0``.
        """
        Z = _points(np.asarray(Z, dtype=complex), self.d)
        H = self.hamiltonian(Z)
        Xr = np.real(Z)
        Eref = self.energy(Xr)
        vals, right = np.linalg.eig(H)
        lvals, left = np.linalg.eig(np.swapaxes(H, -1, -2))
        k = np.argmin(np.abs(vals - Eref[..., None]), axis=-1)
        kl = np.argmin(np.abs(lvals - Eref[..., None]), axis=-1)
        v = np.take_along_axis(right, k[..., None, None], axis=-1)[..., 0]
        u = np.take_along_axis(left, kl[..., None, None], axis=-1)[..., 0]
        e = self.reference_vector()
        Pe = v * (np.sum(u * e, axis=-1) / np.sum(u * v, axis=-1))[..., None]
        nrm = np.sum(e.conj() * Pe, axis=-1)
        if np.any(np.abs(nrm) < 1e-8):
            raise NearDegeneracyError("reference vector nearly orthogonal to the eigenvector")
        return Pe / np.sqrt(nrm)[..., None]

    # -- Taylor data of E ----------------------------------------------------
    def taylor_radius(self, X) -> np.ndarray:
        """Radius of the complex circles used for Cauchy integrals around ``X``.

        Half of the distance at which first-order perturbation theory would
        close the gap: ``gap / (4 |dh|)`` with ``dh`` the traceless part of the
        gradient of ``h``.
        """
        X = _points(np.asarray(X, dtype=float), self.d)
        step = 1e-5
        lip = np.zeros(X.shape[:-1])
        for k in range(self.d):
            e = np.zeros(self.d)
            e[k] = step
            dh = (self.hamiltonian(X + e) - self.hamiltonian(X - e)) / (2 * step)
            tr = np.trace(dh, axis1=-2, axis2=-1)[..., None, None] / self.n_el
            dh = dh - tr * np.eye(self.n_el)
            lip = lip + np.linalg.norm(dh, ord=2, axis=(-2, -1)) ** 2
        lip = np.sqrt(lip)
        rho = self.gap(X) / (4.0 * np.maximum(lip, 1e-300))
        return np.minimum(rho, 1.0)

    def taylor_table(self, a, order: int | None = None) -> np.ndarray:
        """All Taylor coefficients ``D^k E(a) / k!`` with ``|k| <= order``.

        Returns an array of shape ``(order + 1,) * d`` indexed by ``k``;
        entries with ``|k| > order`` are set to zero.
        """
        order = self.taylor_order if order is None else order
        a = np.asarray(a, dtype=float).reshape(self.d)
        self.check_region(a)
        rho = float(self.taylor_radius(a))
        if self.d == 1:
            f = lambda z: self.energy_continued(z[..., None], a)
            nodes = max(64, 4 * order)
            coef = taylor_coefficients(f, a, rho, order, nodes=nodes)[0].real
            deg = np.arange(order + 1)
        else:
            f = lambda Z: self.energy_continued(Z, a)
            nodes = max(32, 2 * order + 4)
            coef = taylor_coefficients_nd(f, a, rho, order, nodes=nodes).real
            deg = np.indices(coef.shape).sum(axis=0)
            coef[deg > order] = 0.0
        # coefficients at the roundoff level of the circle samples are zero
        ring = a + rho * np.exp(2j * np.pi * np.arange(nodes) / nodes)[:, None] * np.ones(self.d)
        scale = float(np.max(np.abs(self.energy_continued(ring, a))))
        coef[np.abs(coef) < 100 * np.finfo(float).eps * scale / rho ** deg] = 0.0
        return coef

    def taylor_E(self, a, m: int) -> dict:
        """Degree-``m`` Taylor coefficients ``{k: D^k E(a)/k!}`` with ``|k| = m``."""
        if m > self.taylor_order:
            raise ValueError(f"order {m} exceeds the configured maximum {self.taylor_order}")
        if m < 0:
            raise ValueError("order must be non-negative")
        T = self.taylor_table(a, max(m, 2))
        out = {}
        for k in np.ndindex(T.shape):
            if sum(k) == m:
                out[tuple(int(x) for x in k)] = float(T[k])
        return out

    def gradient_hessian(self, a):
        """``(E(a), grad E(a), Hess E(a))`` from the Taylor table."""
        T = self.taylor_table(a, 2)
        d = self.d
        g = np.zeros(d)
        Hs = np.zeros((d, d))
        for k in range(d):
            e = [0] * d
            e[k] = 1
            g[k] = T[tuple(e)]
            for l in range(d):
                e2 = [0] * d
                e2[k] += 1
                e2[l] += 1
                c = T[tuple(e2)]
                Hs[k, l] = 2 * c if k == l else c
        return float(T[(0,) * d]), g, Hs

    def describe(self) -> dict:
        return {"name": self.name, "d": self.d, "n_el": self.n_el, "level": self.level,
                "gap_threshold": self.gap_threshold, **self.params}


class DiagonalModel(ElectronicModel):
    """``h(X) = diag(E_0(X), ..., E_{n-1}(X))`` with analytic level functions."""

    name = "diagonal"

    def __init__(self, energies: Sequence[Callable], d: int = 1, level: int = 0, **kw):
        super().__init__(d, len(energies), level, real_gauge=True, **kw)
        self.energies = list(energies)

    def _diag(self, X):
        X = _points(X, self.d)
        return np.stack([np.broadcast_to(f(X), X.shape[:-1]) for f in self.energies], axis=-1)

    def hamiltonian(self, X) -> np.ndarray:
        D = self._diag(X)
        return D[..., :, None] * np.eye(self.n_el)

    def levels(self, X):
        X = _points(np.asarray(X, dtype=float), self.d)
        D = self._diag(X).real
        order = np.argsort(D, axis=-1)
        vals = np.take_along_axis(D, order, axis=-1)
        vecs = np.moveaxis(np.eye(self.n_el)[order], -1, -2)
        return vals, vecs.astype(complex)

    def _selected(self, X):
        D = self._diag(np.real(_points(X, self.d)))
        k = np.argsort(D.real, axis=-1)[..., self.level]
        if np.any(k != k.flat[0]):
            raise NearDegeneracyError("diagonal levels cross")
        return int(k.flat[0])

    def energy_continued(self, Z, center) -> np.ndarray:
        k = self._selected(center)
        return np.asarray(self.energies[k](_points(np.asarray(Z, dtype=complex), self.d)), dtype=complex)

    def eigvec_continued(self, Z) -> np.ndarray:
        Z = _points(np.asarray(Z, dtype=complex), self.d)
        k = self._selected(Z)
        out = np.zeros(Z.shape[:-1] + (self.n_el,), dtype=complex)
        out[..., k] = 1.0
        return out


class TwoLevelModel(ElectronicModel):
    """``h(X) = s(X) I + bx sigma_x + by sigma_y + bz sigma_z`` in closed form.

    The coefficient functions must accept complex arrays of shape ``(..., d)``.
    With ``rho = sqrt(bx^2 + by^2 + bz^2)`` the levels are ``s -+ rho`` and

        lower: (-(bx - i by), rho + bz) / sqrt(2 rho (rho + bz))
        upper: (rho + bz, bx + i by) / sqrt(2 rho (rho + bz)),

    both analytic in ``X`` away from ``rho = 0`` and ``rho + bz = 0``.
    """

    name = "two_level"

    def __init__(self, s: Callable, bx: Callable, by: Callable, bz: Callable, d: int = 1,
                 level: int = 0, real: bool | None = None, **kw):
        super().__init__(d, 2, level, real_gauge=bool(real), **kw)
        self.s, self.bx, self.by, self.bz = s, bx, by, bz

    def _coeffs(self, X):
        X = _points(X, self.d)
        shp = X.shape[:-1]
        return tuple(np.broadcast_to(np.asarray(f(X)), shp) for f in (self.s, self.bx, self.by, self.bz))

    def hamiltonian(self, X) -> np.ndarray:
        s, bx, by, bz = self._coeffs(X)
        H = np.empty(np.shape(s) + (2, 2), dtype=complex)
        H[..., 0, 0] = s + bz
        H[..., 1, 1] = s - bz
        H[..., 0, 1] = bx - 1j * by
        H[..., 1, 0] = bx + 1j * by
        return H

    def _rho(self, bx, by, bz):
        return np.sqrt(bx * bx + by * by + bz * bz + 0j)

    def levels(self, X):
        X = _points(np.asarray(X, dtype=float), self.d)
        s, bx, by, bz = self._coeffs(X)
        rho = self._rho(bx, by, bz).real
        vals = np.stack([s.real - rho, s.real + rho], axis=-1)
        vecs = np.stack([self._vec(0, bx, by, bz), self._vec(1, bx, by, bz)], axis=-1)
        return vals, vecs

    def _vec(self, which, bx, by, bz):
        rho = self._rho(bx, by, bz)
        bx = np.asarray(bx, dtype=complex)
        by = np.asarray(by, dtype=complex)
        bz = np.asarray(bz, dtype=complex)
        # rho + bz without cancellation when bz is close to -rho
        perp2 = bx * bx + by * by
        neg = np.real(bz) < 0
        rpb = np.where(neg, perp2 / np.where(neg, rho - bz, 1.0), rho + bz)
        nrm = np.sqrt(2.0 * rho * rpb)
        if which == 0:
            v = np.stack([-(bx - 1j * by), rpb], axis=-1)
        else:
            v = np.stack([rpb, bx + 1j * by], axis=-1)
        return v / nrm[..., None]

    def energy_continued(self, Z, center=None) -> np.ndarray:
        s, bx, by, bz = self._coeffs(np.asarray(Z, dtype=complex))
        rho = self._rho(bx, by, bz)
        return s - rho if self.level == 0 else s + rho

    def eigvec_continued(self, Z) -> np.ndarray:
        _, bx, by, bz = self._coeffs(np.asarray(Z, dtype=complex))
        return self._vec(self.level, bx, by, bz)


class MatrixModel(ElectronicModel):
    """Generic model from a callable returning Hermitian matrices ``h(X)``."""

    name = "matrix"

    def __init__(self, h: Callable, d: int, n_el: int, level: int = 0, reference=None, **kw):
        super().__init__(d, n_el, level, **kw)
        self._h = h
        self._ref = None if reference is None else np.asarray(reference, dtype=complex)

    def hamiltonian(self, X) -> np.ndarray:
        return np.asarray(self._h(_points(X, self.d)), dtype=complex)

    def reference_vector(self) -> np.ndarray:
        return self._ref if self._ref is not None else super().reference_vector()


# -- eigenvector field along a trajectory ------------------------------------

@dataclass
class PhiField:
    """Phase-fixed eigenvector and its derivatives on a ``(t, w)`` grid (``d = 1``).

    Arrays have shape ``(Nt, Nw)`` for scalars, ``(Nt, Nw, n_el)`` for
    vectors and ``(Nt, Nw, n_el, n_el)`` for the resolvent.
    """

    E: np.ndarray
    phi: np.ndarray
    dphi_w: np.ndarray
    d2phi_w: np.ndarray
    dphi_t: np.ndarray
    resolvent: np.ndarray
    theta: np.ndarray
    gap: np.ndarray
    hamiltonian: np.ndarray = field(repr=False)

    @property
    def phi_dphi(self) -> np.ndarray:
        """``<Phi, d_w Phi>``."""
        return np.einsum("...k,...k->...", self.phi.conj(), self.dphi_w)

    @property
    def phi_d2phi(self) -> np.ndarray:
        """``<Phi, d_w^2 Phi>``."""
        return np.einsum("...k,...k->...", self.phi.conj(), self.d2phi_w)

    def phase_defect(self) -> float:
        """``max |<Phi, d_t Phi>|``."""
        return float(np.max(np.abs(np.einsum("...k,...k->...", self.phi.conj(), self.dphi_t))))


def _vector_taylor(model: ElectronicModel, X: np.ndarray, order: int) -> np.ndarray:
    """Taylor coefficients of the continued eigenvector at real points ``X`` (``d = 1``)."""
    rho = model.taylor_radius(X.ravel())
    f = lambda z: model.eigvec_continued(z[..., None])
    coef = taylor_coefficients(f, X.ravel(), rho, order, nodes=32)
    # roundoff-level coefficients are zero (exactly constant eigenvectors stay constant)
    scale = np.max(np.abs(coef[:, 0]), axis=-1)[:, None, None]
    deg = np.arange(order + 1)[None, :, None]
    coef[np.abs(coef) < 100 * np.finfo(float).eps * scale / rho[:, None, None] ** deg] = 0.0
    return coef.reshape(X.shape + (order + 1, model.n_el))


def phase_fix(model: ElectronicModel, t: np.ndarray, a: np.ndarray, eta: np.ndarray,
              w: np.ndarray, quad_order: int = 8, chunk: int = 20000) -> PhiField:
    """Eigenvector field ``Phi(w, t) = exp(i theta) Phi_raw(a(t) + w)`` with ``<Phi, d_t Phi> = 0``.

    The phase obeys ``d_t theta = -eta Im<Phi_raw, d_X Phi_raw>`` with
    ``theta(w, 0) = 0``.  Its ``w`` derivatives are integrated alongside, so
    every derivative of ``Phi`` is exact up to the time quadrature.

    Parameters
    ----------
    t : (Nt,) uniform time samples.
    a, eta : (Nt,) position and momentum along the trajectory (``d = 1``).
    w : (Nw,) offsets from the classical position.
    """
    if model.d != 1:
        raise NotImplementedError("eigenvector fields are implemented for one nuclear dimension")
    a = np.asarray(a, dtype=float).reshape(-1)
    eta = np.asarray(eta, dtype=float).reshape(-1)
    X = a[:, None] + np.asarray(w, dtype=float)[None, :]
    if not np.all(model.region.contains(X[..., None])):
        raise RegionError("w-grid leaves the validity region along the trajectory")
    vals, vecs = model.levels(X)
    E = vals[..., model.level]
    gap = np.min(np.abs(np.delete(vals, model.level, axis=-1) - E[..., None]), axis=-1)
    if np.any(gap < model.gap_threshold):
        raise NearDegeneracyError(f"spectral gap {np.min(gap):.3e} below threshold on the grid")
    flat = X.ravel()
    coef = np.empty((flat.size, 4, model.n_el), dtype=complex)
    for s in range(0, flat.size, chunk):
        coef[s : s + chunk] = _vector_taylor(model, flat[s : s + chunk], 3)
    coef = coef.reshape(X.shape + (4, model.n_el))
    p0, p1, p2, p3 = (coef[..., m, :] for m in range(4))
    d1, d2, d3 = p1, 2 * p2, 6 * p3
    if model.real_gauge:
        theta = np.zeros(X.shape)
        th_w = th_ww = th_t = np.zeros(X.shape)
    else:
        ip = lambda u, v: np.sum(u.conj() * v, axis=-1)
        alpha = ip(p0, d1).imag
        alpha1 = ip(p0, d2).imag
        alpha2 = (ip(d1, d2) + ip(p0, d3)).imag
        dt = t[1] - t[0]
        theta = -cumulative_along(eta[:, None] * alpha, dt, 0, quad_order)
        th_w = -cumulative_along(eta[:, None] * alpha1, dt, 0, quad_order)
        th_ww = -cumulative_along(eta[:, None] * alpha2, dt, 0, quad_order)
        th_t = -eta[:, None] * alpha
    ph = np.exp(1j * theta)[..., None]
    phi = ph * p0
    dphi_w = ph * (d1 + 1j * th_w[..., None] * p0)
    d2phi_w = ph * (d2 + 2j * th_w[..., None] * d1 + (1j * th_ww - th_w ** 2)[..., None] * p0)
    dphi_t = ph * (eta[:, None, None] * d1 + 1j * th_t[..., None] * p0)
    denom = vals - E[..., None]
    denom[..., model.level] = np.inf
    R = np.einsum("...ik,...k,...jk->...ij", vecs, 1.0 / denom, vecs.conj())
    H = model.hamiltonian(X)
    return PhiField(E=E, phi=phi, dphi_w=dphi_w, d2phi_w=d2phi_w, dphi_t=dphi_t,
                    resolvent=R, theta=theta, gap=gap, hamiltonian=H)


# -- catalog ----------------------------------------------------------------

def _sq(X):
    return np.sum(X * X, axis=-1)


def trivial_adiabatic(omega: float = 1.0, offset: float = 1.0, **kw) -> DiagonalModel:
    """``diag(omega^2 X^2 / 2, omega^2 X^2 / 2 + offset)``: harmonic and decoupled."""
    m = DiagonalModel([lambda X: 0.5 * omega ** 2 * _sq(X),
                       lambda X: 0.5 * omega ** 2 * _sq(X) + offset], **kw)
    m.name = "trivial_adiabatic"
    m.params = {"omega": omega, "offset": offset}
    return m


def anharmonic(lam: float = 0.1, offset: float = 1.0, **kw) -> DiagonalModel:
    """``diag(X^2/2 + lam X^3, X^2/2 + lam X^3 + offset)`` in one dimension."""
    f = lambda X: 0.5 * X[..., 0] ** 2 + lam * X[..., 0] ** 3
    m = DiagonalModel([f, lambda X: f(X) + offset], **kw)
    m.name = "anharmonic"
    m.params = {"lam": lam, "offset": offset}
    return m


def free(offset: float = 1.0, **kw) -> DiagonalModel:
    """``diag(0, offset)``: no force on the selected level."""
    z = lambda X: np.zeros(X.shape[:-1])
    m = DiagonalModel([z, lambda X: z(X) + offset], **kw)
    m.name = "free"
    m.params = {"offset": offset}
    return m


def three_level(omega: float = 1.0, gaps: tuple = (1.0, 1.5), level: int = 1, **kw) -> DiagonalModel:
    """Three harmonic levels ``-g0, 0, g1`` above ``omega^2 X^2/2``; middle level by default."""
    g0, g1 = gaps
    base = lambda X: 0.5 * omega ** 2 * _sq(X)
    m = DiagonalModel([lambda X: base(X) - g0, base, lambda X: base(X) + g1], level=level, **kw)
    m.name = "three_level"
    m.params = {"omega": omega, "gaps": list(gaps)}
    return m


def avoided_crossing(delta: float = 0.5, omega: float = 1.0, level: int = 0, **kw) -> TwoLevelModel:
    """``[[X, delta], [delta, -X]] + omega^2 X^2 / 2`` in one dimension."""
    X0 = lambda X: X[..., 0]
    m = TwoLevelModel(lambda X: 0.5 * omega ** 2 * X0(X) ** 2, lambda X: delta + 0 * X0(X),
                      lambda X: 0 * X0(X), X0, level=level, real=True, **kw)
    m.name = "avoided_crossing"
    m.params = {"delta": delta, "omega": omega}
    return m


def complex_crossing(delta: float = 0.5, omega: float = 1.0, kappa: float = 0.5, level: int = 0,
                     **kw) -> TwoLevelModel:
    """Avoided crossing with the coupling ``delta + i kappa X`` (complex eigenvectors)."""
    X0 = lambda X: X[..., 0]
    m = TwoLevelModel(lambda X: 0.5 * omega ** 2 * X0(X) ** 2, lambda X: delta + 0 * X0(X),
                      lambda X: -kappa * X0(X), X0, level=level, real=False, **kw)
    m.name = "complex_crossing"
    m.params = {"delta": delta, "omega": omega, "kappa": kappa}
    return m


catalog = {
    "trivial_adiabatic": trivial_adiabatic,
    "avoided_crossing": avoided_crossing,
    "complex_crossing": complex_crossing,
    "three_level": three_level,
    "anharmonic": anharmonic,
    "free": free,
}


def make_model(name: str, **params) -> ElectronicModel:
    """Instantiate a catalog model by name."""
    try:
        factory = catalog[name]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(catalog)}") from None
    return factory(**params)
