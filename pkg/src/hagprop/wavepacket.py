"""Hagedorn wave packets ``phi_j(A, B, hbar, a, eta, x)``.

The packets are generated from the normalized complex Gaussian ``phi_0`` by the
raising operators

    R_m = (2 hbar)^(-1/2) [ sum_n conj(B)_{nm} (x_n - a_n)
                            - i sum_n conj(A)_{nm} (-i hbar d/dx_n - eta_n) ].

Inverting the ladder definitions gives

    x - a            = sqrt(hbar/2) (A R + conj(A) L),
    -i hbar d/dx - eta = i sqrt(hbar/2) (B R - conj(B) L),

so position and momentum act on coefficient vectors through banded matrices.
Everything here works in ``d`` dimensions with :class:`MultiIndexTable`
ordering of the basis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .multiindex import MultiIndexTable

__all__ = [
    "WavepacketParams",
    "ParameterError",
    "cond1_defects",
    "random_params",
    "eval_phi0",
    "evaluate_basis",
    "BasisBlock",
    "raise_all",
    "raising_matrix",
    "position_matrix",
    "derivative_matrix",
    "projector_norm_check",
    "quadrature_rule",
    "gram_matrix",
]


class ParameterError(ValueError):
    """Wave packet parameters are inconsistent (shape, invertibility, ...)."""


def cond1_defects(A, B) -> tuple[float, float]:
    """Frobenius defects ``(|A^t B - B^t A|, |A^* B + B^* A - 2 I|)``."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    if A.shape != B.shape or A.shape[0] != A.shape[1]:
        raise ParameterError(f"A and B must be square of equal shape, got {A.shape}, {B.shape}")
    d = A.shape[0]
    sym = A.T @ B - B.T @ A
    herm = A.conj().T @ B + B.conj().T @ A - 2.0 * np.eye(d)
    return float(np.linalg.norm(sym)), float(np.linalg.norm(herm))


@dataclass(frozen=True)
class WavepacketParams:
    """Parameters ``(A, B, a, eta, S, hbar)`` of a Hagedorn packet family.

    ``sqrt_det_A`` fixes the branch of ``det(A)^(1/2)``; when omitted the
    principal branch is used.  Along a trajectory the branch is tracked by
    continuity, see :mod:`hagprop.classical_flow`.
    """

    A: np.ndarray
    B: np.ndarray
    a: np.ndarray
    eta: np.ndarray
    S: float = 0.0
    hbar: float = 1.0
    sqrt_det_A: complex | None = field(default=None)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=complex))
        B = np.atleast_2d(np.asarray(self.B, dtype=complex))
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        eta = np.atleast_1d(np.asarray(self.eta, dtype=float))
        d = A.shape[0]
        if A.shape != (d, d) or B.shape != (d, d) or a.shape != (d,) or eta.shape != (d,):
            raise ParameterError(
                f"inconsistent shapes A{A.shape} B{B.shape} a{a.shape} eta{eta.shape}"
            )
        if not self.hbar > 0:
            raise ParameterError("hbar must be positive")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "S", float(self.S))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def d(self) -> int:
        return self.A.shape[0]

    def validate(self) -> tuple[float, float]:
        return cond1_defects(self.A, self.B)

    def with_(self, **kw) -> "WavepacketParams":
        return replace(self, **kw)

    @property
    def Ainv(self) -> np.ndarray:
        if abs(np.linalg.det(self.A)) < 1e-300 or np.linalg.cond(self.A) > 1e14:
            raise ParameterError("A is not invertible")
        return np.linalg.inv(self.A)

    @property
    def sqrt_det(self) -> complex:
        if self.sqrt_det_A is not None:
            return complex(self.sqrt_det_A)
        return complex(np.sqrt(complex(np.linalg.det(self.A))))

    def width_matrix(self) -> np.ndarray:
        """``B A^{-1}``; symmetric with positive definite real part for valid params."""
        return self.B @ self.Ainv

    def covariance(self) -> np.ndarray:
        """``A A^*`` (real symmetric), the inverse of ``Re(B A^{-1})``."""
        return (self.A @ self.A.conj().T).real


def random_params(d: int = 1, hbar: float = 1.0, rng=None, spread: float = 0.5) -> WavepacketParams:
    """Random parameters satisfying the compatibility conditions.

    Uses ``A = G^{-1/2} U`` and ``B = (G + i H) A`` with ``G`` positive
    definite, ``H`` symmetric and ``U`` unitary.
    """
    rng = np.random.default_rng(rng)
    M = rng.normal(size=(d, d)) * spread
    G = M @ M.T + np.eye(d) * rng.uniform(0.5, 2.0)
    Hs = rng.normal(size=(d, d)) * spread
    H = 0.5 * (Hs + Hs.T)
    Z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    U, _ = np.linalg.qr(Z)
    w, V = np.linalg.eigh(G)
    G_isqrt = V @ np.diag(w ** -0.5) @ V.T
    A = G_isqrt @ U
    B = (G + 1j * H) @ A
    return WavepacketParams(A, B, rng.normal(size=d), rng.normal(size=d), 0.0, hbar)


def _as_points(X, d: int) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if d == 1 and (X.ndim == 0 or X.shape[-1] != 1):
        X = X[..., None]
    if X.shape[-1] != d:
        raise ParameterError(f"points must have trailing dimension {d}, got shape {X.shape}")
    return X


def eval_phi0(params: WavepacketParams, X) -> np.ndarray:
    """The normalized complex Gaussian ``phi_0`` at points ``X`` (shape ``(..., d)``)."""
    p = params
    X = _as_points(X, p.d)
    dx = X - p.a
    C = p.width_matrix()
    quad = np.einsum("...i,ij,...j->...", dx, C, dx)
    lin = dx @ p.eta
    pref = (math.pi * p.hbar) ** (-p.d / 4.0) / p.sqrt_det
    return pref * np.exp(-quad / (2.0 * p.hbar) + 1j * lin / p.hbar)


def evaluate_basis(params: WavepacketParams, table: MultiIndexTable, X) -> np.ndarray:
    """All ``phi_j`` of ``table`` at points ``X``; returns shape ``(..., len(table))``.

    Uses ``sqrt(j_k) phi_j = sqrt(2/hbar) (A^{-1}(x-a))_k phi_{j-e_k}
    - sum_l (A^{-1} conj(A))_{kl} sqrt(j_l - delta_kl) phi_{j-e_k-e_l}``.
    """
    p = params
    if table.d != p.d:
        raise ParameterError("table dimension does not match parameters")
    X = _as_points(X, p.d)
    Ainv = p.Ainv
    y = np.sqrt(2.0 / p.hbar) * np.einsum("ij,...j->...i", Ainv, X - p.a)
    M = Ainv @ p.A.conj()
    out = np.empty(X.shape[:-1] + (len(table),), dtype=complex)
    out[..., 0] = eval_phi0(p, X)
    idx = table.indices
    for k in range(1, len(table)):
        j = idx[k]
        axis = int(np.flatnonzero(j)[0])
        parent = table.neighbor(k, axis, -1)
        q = idx[parent]
        val = y[..., axis] * out[..., parent]
        for l in range(p.d):
            if q[l] > 0:
                val = val - M[axis, l] * np.sqrt(q[l]) * out[..., table.neighbor(parent, l, -1)]
        out[..., k] = val / np.sqrt(j[axis])
    return out


@dataclass
class BasisBlock:
    """Packets ``phi_j`` for all ``j`` of ``table`` sampled at ``X``."""

    params: WavepacketParams
    table: MultiIndexTable
    X: np.ndarray
    values: np.ndarray

    @classmethod
    def ground(cls, params: WavepacketParams, X) -> "BasisBlock":
        X = _as_points(X, params.d)
        return cls(params, MultiIndexTable(params.d, 0), X, eval_phi0(params, X)[..., None])


def raise_all(block: BasisBlock) -> BasisBlock:
    """Extend a block of degree ``n`` to degree ``n + 1`` with the raising operators."""
    p, old = block.params, block.table
    new = MultiIndexTable(p.d, old.J + 1)
    y = np.sqrt(2.0 / p.hbar) * np.einsum("ij,...j->...i", p.Ainv, block.X - p.a)
    M = p.Ainv @ p.A.conj()
    vals = np.empty(block.values.shape[:-1] + (len(new),), dtype=complex)
    vals[..., : len(old)] = block.values
    for k in range(len(old), len(new)):
        j = new.indices[k]
        axis = int(np.flatnonzero(j)[0])
        parent = new.neighbor(k, axis, -1)
        q = new.indices[parent]
        v = y[..., axis] * vals[..., parent]
        for l in range(p.d):
            if q[l] > 0:
                v = v - M[axis, l] * np.sqrt(q[l]) * vals[..., new.neighbor(parent, l, -1)]
        vals[..., k] = v / np.sqrt(j[axis])
    return BasisBlock(p, new, block.X, vals)


def raising_matrix(table: MultiIndexTable, axis: int) -> np.ndarray:
    """Matrix of ``R_axis`` in the basis: entry ``(j, q) = sqrt(q_axis + 1)`` for ``j = q + e_axis``."""
    n = len(table)
    R = np.zeros((n, n))
    for q in range(n):
        j = table.neighbor(q, axis, +1)
        if j >= 0:
            R[j, q] = np.sqrt(table.indices[q, axis] + 1)
    return R


def _ladders(table: MultiIndexTable):
    R = [raising_matrix(table, k) for k in range(table.d)]
    return R, [r.T for r in R]


def single_step_matrices(A, B, hbar: float, table: MultiIndexTable, eta=None):
    """Position ``x_k - a_k`` and derivative ``d/dx_k`` matrices on ``table``.

    The matrices are exact on rows and columns of degree ``< table.J``; the
    last grade is truncated.
    """
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    B = np.atleast_2d(np.asarray(B, dtype=complex))
    d = table.d
    R, L = _ladders(table)
    s = np.sqrt(hbar / 2.0)
    Xs, Ds = [], []
    for k in range(d):
        Xk = sum(A[k, m] * R[m] + np.conj(A[k, m]) * L[m] for m in range(d)) * s
        Dk = -sum(B[k, m] * R[m] - np.conj(B[k, m]) * L[m] for m in range(d)) / np.sqrt(2.0 * hbar)
        if eta is not None and eta[k] != 0:
            Dk = Dk + (1j * eta[k] / hbar) * np.eye(len(table))
        Xs.append(np.asarray(Xk, dtype=complex))
        Ds.append(np.asarray(Dk, dtype=complex))
    return Xs, Ds


def _monomial(mats, m, n_out: int) -> np.ndarray:
    out = np.eye(mats[0].shape[0], dtype=complex)
    for k, mk in enumerate(m):
        for _ in range(int(mk)):
            out = mats[k] @ out
    return out[:n_out, :n_out]


def position_matrix(params: WavepacketParams, table: MultiIndexTable, m) -> np.ndarray:
    """``<phi_j, (x - a)^m phi_q>`` for ``j, q`` in ``table`` (exact, banded)."""
    m = tuple(int(x) for x in np.atleast_1d(m))
    big = MultiIndexTable(table.d, table.J + sum(m))
    Xs, _ = single_step_matrices(params.A, params.B, params.hbar, big)
    return _monomial(Xs, m, len(table))


def derivative_matrix(params: WavepacketParams, table: MultiIndexTable, m) -> np.ndarray:
    """``<phi_j, D^m phi_q>`` for ``j, q`` in ``table`` (exact, banded)."""
    m = tuple(int(x) for x in np.atleast_1d(m))
    big = MultiIndexTable(table.d, table.J + sum(m))
    _, Ds = single_step_matrices(params.A, params.B, params.hbar, big, eta=params.eta)
    return _monomial(Ds, m, len(table))


def projector_norm_check(params: WavepacketParams, table: MultiIndexTable, n: int, m):
    """Spectral norm of ``(x-a)^m P_{|j|<=n}`` and its a priori bound.

    Returns ``(lhs, rhs)`` with
    ``rhs = (sqrt(2 hbar) d |A|)^{|m|} ((n+|m|)!/n!)^{1/2}``.
    """
    m = tuple(int(x) for x in np.atleast_1d(m))
    k = sum(m)
    if n + k > table.J:
        raise ValueError(f"need n + |m| <= {table.J}, got {n + k}")
    sub = MultiIndexTable(table.d, n + k)
    Y = position_matrix(params, sub, m)
    lhs = float(np.linalg.norm(Y[:, : sub.prefix(n)], 2))
    normA = float(np.linalg.norm(params.A, 2))
    rhs = (np.sqrt(2 * params.hbar) * params.d * normA) ** k * math.sqrt(
        math.factorial(n + k) / math.factorial(n)
    )
    return lhs, rhs


def quadrature_rule(params: WavepacketParams, order: int):
    """Gauss-Hermite nodes and weights adapted to ``|phi_0|^2``.

    Nodes are ``a + sqrt(hbar) L s`` with ``L L^T = A A^*``; weights already
    include ``exp(|s|^2)`` so ``sum(w * f(x))`` integrates ``f`` against
    Lebesgue measure.  Integrands ``polynomial * |phi_0|^2`` of degree below
    ``2 * order`` are integrated exactly.
    """
    s1, w1 = np.polynomial.hermite.hermgauss(order)
    d = params.d
    grids = np.meshgrid(*([s1] * d), indexing="ij")
    S = np.stack([g.ravel() for g in grids], axis=-1)
    W = np.ones(S.shape[0])
    for k in range(d):
        W = W * w1[np.unravel_index(np.arange(S.shape[0]), (order,) * d)[k]]
    L = np.linalg.cholesky(params.covariance())
    X = params.a + np.sqrt(params.hbar) * S @ L.T
    jac = params.hbar ** (d / 2.0) * np.linalg.det(L)
    return X, W * jac * np.exp(np.sum(S ** 2, axis=1))


def gram_matrix(params: WavepacketParams, table: MultiIndexTable, order: int | None = None) -> np.ndarray:
    """``<phi_j, phi_q>`` by Gauss-Hermite quadrature (default order ``2J + 8``)."""
    order = order or 2 * table.J + 8
    X, W = quadrature_rule(params, order)
    V = evaluate_basis(params, table, X)
    return (V.conj() * W[:, None]).T @ V
