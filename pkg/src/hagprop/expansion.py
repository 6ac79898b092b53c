"""Order-by-order construction of the multiple-scales expansion.

With ``w = X - a(t)`` and ``y = w / eps`` the solution is sought as

    exp(i S / eps^2 + i eta y / eps) sum_n eps^n psi_n(w, y, t),
    psi_n = g_n Phi + phi_n_perp,

where ``g_n = sum_j c_{n,j}(w, t) phi_j(y)`` and
``phi_n_perp = sum_j d_{n,j}(w, t) phi_j(y)`` are expanded in the moving
packets ``phi_j(A(t), B(t), 1, 0, 0, y)``.  Because
``i d_t phi_j = (-1/2 d_y^2 + E''(a) y^2 / 2) phi_j``, the order-``n`` equations
reduce to relations between coefficient fields.  Writing ``Y`` and ``D`` for
multiplication by ``y`` and differentiation in ``y`` (banded in ``j``),
``E_m = E^{(m)}(a) / m!``, primes for ``w`` derivatives and dots for ``t``
derivatives at fixed ``w``, the perpendicular part is

    d_n = r [ i d'_{n-2}. + i c_{n-2} Phi. - sum_{3<=m<=n} E_m Y^m d_{n-m}
              + D c_{n-3} Phi' + D d_{n-3}'
              + c_{n-4}' Phi' + c_{n-4} Phi'' / 2 + d_{n-4}'' / 2 ]

and the coefficient along ``Phi`` obeys

    i c_n. = sum_{3<=m<=n+2} E_m Y^m c_{n+2-m}
             - D [c_{n-1}' + <Phi, Phi'> c_{n-1} + <Phi, d_{n-1}'>]
             - [c_{n-2}'' + 2 <Phi, Phi'> c_{n-2}' + <Phi, Phi''> c_{n-2}
                + <Phi, d_{n-2}''>] / 2
             + i <Phi., d_n>,

integrated from ``c_n(w, 0) = 0``.  ``c_0`` is constant and ``d_0 = d_1 = 0``.
Only one nuclear dimension is implemented.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import cumulative_along, diff_along, interp_along
from .classical_flow import Trajectory
from .electronic import ElectronicModel, NearDegeneracyError, PhiField, phase_fix

__all__ = [
    "WGrid",
    "ExpansionSettings",
    "CoefficientField",
    "Expansion",
    "init_order0",
    "ladder_y",
    "ladder_dy",
    "expand",
    "coefficient_growth_report",
    "recursion_residuals",
    "load_field",
]


@dataclass(frozen=True)
class WGrid:
    """Uniform grid in ``w`` covering ``[-b1, b1]`` plus ``ghost`` extra nodes per side.

    The node count is odd, so ``w = 0`` is a node.
    """

    b1: float
    h: float
    ghost: int = 6

    @property
    def half(self) -> int:
        return int(math.ceil(self.b1 / self.h - 1e-9)) + self.ghost

    @property
    def w(self) -> np.ndarray:
        return self.h * np.arange(-self.half, self.half + 1)

    @property
    def n(self) -> int:
        return 2 * self.half + 1

    def interior(self, margin: int = 0) -> np.ndarray:
        """Mask of nodes with ``|w| <= b1`` (and at least ``margin`` nodes from the edges)."""
        w = self.w
        m = np.abs(w) <= self.b1 + 1e-12
        if margin:
            m[:margin] = False
            m[-margin:] = False
        return m


@dataclass(frozen=True)
class ExpansionSettings:
    """Discretization controls for :func:`expand`.

    Parameters
    ----------
    n_max : int
        Highest order ``n`` of the scalar fields ``c_n``; the perpendicular
        fields are computed to ``n_max + 2``.
    nt : int
        Number of time samples on ``[0, T]``.
    t_order, w_order : int
        Accuracy order of the finite differences in ``t`` and ``w``.
    quad_order : int
        Accuracy order of the cumulative time quadrature.
    """

    n_max: int = 6
    nt: int = 401
    t_order: int = 8
    w_order: int = 8
    quad_order: int = 8


@dataclass
class CoefficientField:
    """Samples of ``c_{n,j}`` (kind ``"c"``) or ``d_{n,j}`` (kind ``"d"``).

    ``values`` has shape ``(Nt, Nw, K)`` for ``c`` and ``(Nt, Nw, K, n_el)`` for
    ``d``, where ``K`` is the number of multi-indices kept (support
    ``|j| <= J + 3n`` for ``c`` and ``|j| <= J + 3n - 6`` for ``d``).
    """

    n: int
    kind: str
    values: np.ndarray
    t: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)

    @property
    def K(self) -> int:
        return self.values.shape[2]

    def dump(self, path, J: int) -> None:
        """Binary dump: magic line, JSON header line, little-endian complex128 data (C order)."""
        v = np.ascontiguousarray(self.values, dtype="<c16")
        head = {
            "format": "hagprop-field", "version": 1, "d": 1, "J": J, "n": self.n, "kind": self.kind,
            "shape": list(v.shape), "axes": ["t", "w", "j"] + (["el"] if self.kind == "d" else []),
            "t0": float(self.t[0]), "t1": float(self.t[-1]), "nt": len(self.t),
            "w0": float(self.w[0]), "w1": float(self.w[-1]), "nw": len(self.w),
        }
        with open(path, "wb") as fh:
            fh.write(b"HAGFIELD\n")
            fh.write((json.dumps(head) + "\n").encode())
            fh.write(v.tobytes())


def load_field(path) -> tuple[dict, np.ndarray]:
    """Read a field written by :meth:`CoefficientField.dump`."""
    with open(path, "rb") as fh:
        if fh.readline() != b"HAGFIELD\n":
            raise ValueError(f"{path} is not a field dump")
        head = json.loads(fh.readline())
        data = np.frombuffer(fh.read(), dtype="<c16").reshape(head["shape"])
    return head, data


# -- banded operators in the packet index (d = 1, hbar = 1) --------------------

def _ladder(v: np.ndarray, up, down) -> np.ndarray:
    """``out_j = up sqrt(j) v_{j-1} + down sqrt(j+1) v_{j+1}`` along axis 2, length ``K+1``."""
    K = v.shape[2]
    shp = list(v.shape)
    shp[2] = K + 1
    out = np.zeros(shp, dtype=complex)
    ex = (slice(None),) * 2
    sq = np.sqrt(np.arange(K + 1, dtype=float))
    bshape = (1, 1, -1) + (1,) * (v.ndim - 3)
    out[ex + (slice(1, K + 1),)] = up * (sq[1:].reshape(bshape) * v)
    if K > 1:
        out[ex + (slice(0, K - 1),)] += down * (sq[1:K].reshape(bshape) * v[ex + (slice(1, K),)])
    return out


def _tb(x: np.ndarray, ndim: int) -> np.ndarray:
    """Broadcast a per-time array against ``(Nt, Nw, K, ...)``."""
    return np.asarray(x).reshape((-1,) + (1,) * (ndim - 1))


def ladder_y(v: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Coefficients of ``y psi`` from those of ``psi`` (``y = (A R + conj(A) L) / sqrt 2``)."""
    s = 1.0 / math.sqrt(2.0)
    return _ladder(v, s * _tb(A, v.ndim), s * _tb(np.conj(A), v.ndim))


def ladder_dy(v: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Coefficients of ``d_y psi`` (``d_y = -(B R - conj(B) L) / sqrt 2``)."""
    s = 1.0 / math.sqrt(2.0)
    return _ladder(v, -s * _tb(B, v.ndim), s * _tb(np.conj(B), v.ndim))


def _fit(v: np.ndarray, K: int) -> np.ndarray:
    if v.shape[2] == K:
        return v
    if v.shape[2] > K:
        return v[:, :, :K]
    pad = [(0, 0)] * v.ndim
    pad[2] = (0, K - v.shape[2])
    return np.pad(v, pad)


def _add(acc, v):
    if acc is None:
        return v
    K = max(acc.shape[2], v.shape[2])
    return _fit(acc, K) + _fit(v, K)


# -- the expansion ---------------------------------------------------------------

def init_order0(c0, nt: int, nw: int, tol: float = 1e-10) -> CoefficientField:
    """Constant scalar field ``c_{0,j}(w, t) = c0_j``; ``c0`` must be normalized."""
    c0 = np.asarray(c0, dtype=complex).ravel()
    nrm = float(np.sum(np.abs(c0) ** 2))
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"initial coefficients must satisfy sum |c0|^2 = 1, got {nrm:.12g}")
    vals = np.broadcast_to(c0, (nt, nw, len(c0)))
    return CoefficientField(0, "c", vals, np.zeros(nt), np.zeros(nw))


@dataclass
class Expansion:
    """All coefficient fields of one scenario together with the sampled geometry."""

    settings: ExpansionSettings
    grid: WGrid
    t: np.ndarray
    a: np.ndarray
    eta: np.ndarray
    A: np.ndarray
    B: np.ndarray
    S: np.ndarray
    sqrt_det: np.ndarray
    taylor: np.ndarray
    phi: PhiField
    J: int
    trajectory: Trajectory | None = field(default=None, repr=False)
    c: list = field(default_factory=list)
    d: list = field(default_factory=list)

    @property
    def w(self) -> np.ndarray:
        return self.grid.w

    @property
    def ht(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def n_el(self) -> int:
        return self.phi.phi.shape[-1]

    def c_field(self, n: int) -> CoefficientField:
        return CoefficientField(n, "c", self.c[n], self.t, self.w)

    def d_field(self, n: int) -> CoefficientField | None:
        if self.d[n] is None:
            return None
        return CoefficientField(n, "d", self.d[n], self.t, self.w)

    def order_vector(self, n: int, t_index=None) -> np.ndarray:
        """``V_n = c_n Phi + d_n`` with shape ``(Nt, Nw, K, n_el)`` (or one time slice)."""
        sl = slice(None) if t_index is None else t_index
        c = np.asarray(self.c[n][sl]) if n < len(self.c) else None
        d = self.d[n][sl] if n < len(self.d) and self.d[n] is not None else None
        phi = self.phi.phi[sl]
        out = None
        if c is not None:
            out = c[..., None] * phi[..., None, :]
        if d is not None:
            out = d if out is None else _add_last(out, d)
        return out

    def at_time(self, n: int, t: float, kind: str, npts: int = 6) -> np.ndarray:
        """Field ``c_n`` or ``d_n`` interpolated to time ``t`` on the ``w`` grid."""
        arr = self.c[n] if kind == "c" else self.d[n]
        if arr is None:
            return None
        k = (t - self.t[0]) / self.ht
        if abs(k - round(k)) < 1e-9:
            return np.asarray(arr[int(round(k))])
        return interp_along(np.asarray(arr), 0, self.t[0], self.ht, [t], npts)[0]


def _add_last(u, v):
    K = max(u.shape[-2], v.shape[-2])
    def fit(x):
        if x.shape[-2] == K:
            return x
        pad = [(0, 0)] * x.ndim
        pad[-2] = (0, K - x.shape[-2])
        return np.pad(x, pad)
    return fit(u) + fit(v)


class _Ops:
    """Derivative and pointwise operators on ``(t, w, j[, el])`` arrays."""

    def __init__(self, ht, hw, t_order, w_order, phi: PhiField, A, B, taylor):
        self.ht, self.hw = ht, hw
        self.t_order, self.w_order = t_order, w_order
        self.phi = phi
        self.A, self.B = A, B
        self.taylor = taylor
        self.pdp = phi.phi_dphi[:, :, None]
        self.pd2p = phi.phi_d2phi[:, :, None]

    def dt(self, f):
        return diff_along(f, self.ht, 0, 1, self.t_order)

    def dw(self, f, k=1):
        return diff_along(f, self.hw, 1, k, self.w_order)

    def Y(self, v):
        return ladder_y(v, self.A)

    def D(self, v):
        return ladder_dy(v, self.B)

    @staticmethod
    def outer(c, vec):
        """Scalar field times electronic vector field."""
        return c[..., None] * vec[:, :, None, :]

    def proj(self, v, vec=None):
        """``<vec, v>`` pointwise (``vec = Phi`` by default)."""
        vec = self.phi.phi if vec is None else vec
        return np.einsum("twa,twja->twj", vec.conj(), v)

    def resolvent(self, v):
        return np.einsum("twab,twjb->twja", self.phi.resolvent, v)

    def taylor_sum(self, fields, n, m_max):
        """``sum_{3<=m<=m_max} E_m Y^m fields[n - m]`` by a Horner scheme."""
        terms = [(m, fields[n - m]) for m in range(3, m_max + 1)
                 if 0 <= n - m < len(fields) and fields[n - m] is not None]
        if not terms:
            return None
        acc = None
        for m in range(max(m for m, _ in terms), 2, -1):
            if acc is not None:
                acc = self.Y(acc)
            v = fields[n - m] if 0 <= n - m < len(fields) else None
            if v is not None:
                e = _tb(self.taylor[:, m], np.ndim(v))
                acc = _add(acc, e * v)
        for _ in range(3):
            acc = self.Y(acc)
        return acc


def _perp_source(ops: _Ops, c, d, n):
    """Bracket of the perpendicular equation at order ``n`` (before ``r``)."""
    phi = ops.phi
    S = None
    if n - 2 >= 0:
        if d[n - 2] is not None:
            S = _add(S, 1j * ops.dt(d[n - 2]))
        S = _add(S, 1j * ops.outer(np.asarray(c[n - 2]), phi.dphi_t))
    T = ops.taylor_sum(d, n, n)
    if T is not None:
        S = _add(S, -T)
    if n - 3 >= 0:
        S = _add(S, ops.outer(ops.D(np.asarray(c[n - 3])), phi.dphi_w))
        if d[n - 3] is not None:
            S = _add(S, ops.D(ops.dw(d[n - 3])))
    if n - 4 >= 0:
        c4 = np.asarray(c[n - 4])
        S = _add(S, ops.outer(ops.dw(c4), phi.dphi_w) + 0.5 * ops.outer(c4, phi.d2phi_w))
        if d[n - 4] is not None:
            S = _add(S, 0.5 * ops.dw(d[n - 4], 2))
    return S


def _parallel_rhs(ops: _Ops, c, d, n):
    """Right-hand side of ``i d_t c_n`` at order ``n``."""
    R = ops.taylor_sum(c, n + 2, n + 2)
    c1 = np.asarray(c[n - 1])
    inner = ops.dw(c1) + ops.pdp * c1
    if d[n - 1] is not None:
        inner = _add(inner, ops.proj(ops.dw(d[n - 1])))
    R = _add(R, -ops.D(inner))
    if n - 2 >= 0:
        c2 = np.asarray(c[n - 2])
        inner = ops.dw(c2, 2) + 2 * ops.pdp * ops.dw(c2) + ops.pd2p * c2
        if d[n - 2] is not None:
            inner = _add(inner, ops.proj(ops.dw(d[n - 2], 2)))
        R = _add(R, -0.5 * inner)
    if d[n] is not None:
        R = _add(R, 1j * ops.proj(d[n], ops.phi.dphi_t))
    return R


def _support(J, n, kind):
    return J + 3 * n + 1 if kind == "c" else J + 3 * n - 5


def expand(model: ElectronicModel, traj: Trajectory, c0, grid: WGrid,
           settings: ExpansionSettings = ExpansionSettings(), T: float | None = None,
           progress=None) -> Expansion:
    """Compute ``c_n`` for ``n <= n_max`` and ``d_n`` for ``n <= n_max + 2``.

    Parameters
    ----------
    model : ElectronicModel
        One nuclear dimension.
    traj : Trajectory
        Classical trajectory covering ``[0, T]``.
    c0 : array_like
        Normalized initial coefficients over ``|j| <= J``.
    grid : WGrid
    settings : ExpansionSettings
    T : float, optional
        Final time (default: end of the trajectory).

    Raises
    ------
    NearDegeneracyError
        If the gap closes anywhere on the grid, before any field is computed.
    """
    if model.d != 1 or traj.d != 1:
        raise NotImplementedError("the expansion is implemented for one nuclear dimension")
    T = traj.T if T is None else float(T)
    nt = settings.nt
    t = np.linspace(traj.t[0], traj.t[0] + T, nt)
    a, eta, A, B, S, sd = traj.state(t)
    a, eta, A, B = a[:, 0], eta[:, 0], A[:, 0, 0], B[:, 0, 0]
    w = grid.w
    phi = phase_fix(model, t, a, eta, w, quad_order=settings.quad_order)
    M = settings.n_max + 2
    taylor = np.array([model.taylor_table(ai, M) for ai in a])
    c0 = np.asarray(c0, dtype=complex).ravel()
    J = len(c0) - 1
    exp_ = Expansion(settings, grid, t, a, eta, A, B, S, sd, taylor, phi, J, traj)
    ops = _Ops(t[1] - t[0], grid.h, settings.t_order, settings.w_order, phi, A, B, taylor)
    c = [init_order0(c0, nt, len(w)).values]
    d = [None, None]
    ht = t[1] - t[0]
    for n in range(1, M + 1):
        if n >= 2:
            Sn = _perp_source(ops, c, d, n)
            dn = ops.resolvent(Sn)
            d.append(_fit(dn, _support(J, n, "d")))
        if n <= settings.n_max:
            rhs = _parallel_rhs(ops, c, d, n)
            cn = -1j * cumulative_along(rhs, ht, 0, settings.quad_order)
            c.append(_fit(cn, _support(J, n, "c")))
        if progress is not None:
            progress(n)
    exp_.c, exp_.d = c, d
    return exp_


def coefficient_growth_report(exp_: Expansion) -> dict:
    """Sup norms ``s_n = max_{w, t} ||c_n||`` over ``|w| <= b1`` and a growth fit.

    The fit is ``log s_n - (n/2) log n = log C + n log tau`` over orders with
    ``s_n > 0``; returns ``{"s": [...], "tau": ..., "C": ...}``.
    """
    mask = exp_.grid.interior()
    s = []
    for cn in exp_.c:
        v = np.asarray(cn)[:, mask]
        s.append(float(np.max(np.sqrt(np.sum(np.abs(v) ** 2, axis=-1)))))
    n = np.arange(len(s))
    sel = (n >= 1) & (np.array(s) > 0)
    out = {"s": s, "tau": None, "C": None}
    if np.count_nonzero(sel) >= 2:
        y = np.log(np.array(s)[sel]) - 0.5 * n[sel] * np.log(n[sel])
        slope, icpt = np.polyfit(n[sel], y, 1)
        out["tau"] = float(np.exp(slope))
        out["C"] = float(np.exp(icpt))
    return out


def recursion_residuals(exp_: Expansion, model: ElectronicModel | None = None, n_max: int | None = None,
                        extra_order: int = 2, t_margin: int = 8, w_margin: int = 8) -> dict:
    """Substitute the computed fields back into the order equations.

    Derivatives are recomputed with stencils ``extra_order`` orders more
    accurate than those used to build the fields, so the residuals measure the
    discretization error of the construction.  Returned per order ``n``:

    * ``perp``: ``max |(h - E) d_n - P_perp [bracket]|``,
    * ``par``: ``max |i d_t c_n - rhs_n|``,
    * ``orth``: ``max |<Phi, d_n>|``,
    * ``c_t0``: ``max |c_n(w, 0)|``,

    maxima over interior nodes (``|w| <= b1``, away from the grid edges).
    """
    st = exp_.settings
    ops = _Ops(exp_.ht, exp_.grid.h, st.t_order + extra_order, st.w_order + extra_order,
               exp_.phi, exp_.A, exp_.B, exp_.taylor)
    n_max = st.n_max if n_max is None else n_max
    tm = slice(t_margin, len(exp_.t) - t_margin)
    wm = exp_.grid.interior(w_margin)
    H = exp_.phi.hamiltonian
    E = exp_.phi.E
    c, d = exp_.c, exp_.d
    out = {}
    for n in range(1, n_max + 1):
        row = {}
        if n >= 2 and d[n] is not None:
            Sn = _perp_source(ops, c, d, n)
            K = max(Sn.shape[2], d[n].shape[2])
            Sn, dn = _fit(Sn, K), _fit(d[n], K)
            PS = Sn - ops.outer(ops.proj(Sn), exp_.phi.phi)
            hd = np.einsum("twab,twjb->twja", H, dn) - E[:, :, None, None] * dn
            row["perp"] = float(np.max(np.abs(hd - PS)[tm][:, wm]))
            row["orth"] = float(np.max(np.abs(ops.proj(d[n]))))
        else:
            row["perp"] = 0.0
            row["orth"] = 0.0
        rhs = _parallel_rhs(ops, c, d, n)
        cn = c[n]
        K = max(rhs.shape[2], cn.shape[2])
        lhs = 1j * ops.dt(_fit(cn, K))
        row["par"] = float(np.max(np.abs(lhs - _fit(rhs, K))[tm][:, wm]))
        row["c_t0"] = float(np.max(np.abs(cn[0])))
        out[n] = row
    return out
