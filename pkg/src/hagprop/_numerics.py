"""Small numerical kernels shared by the propagation modules.

Finite-difference weights (Fornberg), differentiation and cumulative
integration of uniform samples, local Lagrange interpolation, and
Taylor coefficients of analytic functions from Cauchy integrals.
"""

from __future__ import annotations

import numpy as np


def fd_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Fornberg weights for derivatives ``0..m`` at ``z`` from nodes ``x``.

    Returns an array of shape ``(m + 1, len(x))``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1, c4 = 1.0, x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2, c5, c4 = 1.0, c4, x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c.T


def _stencil_bounds(i: int, n: int, width: int) -> tuple[int, int]:
    lo = min(max(i - (width - 1) // 2, 0), n - width)
    return lo, lo + width


def _exact_on_constants(w: np.ndarray, k: int) -> np.ndarray:
    """Adjust entry ``k`` so the weights sum to zero in floating point."""
    w = w.copy()
    w[k] = 0.0
    w[k] = -np.sum(w)
    return w


def diff_along(f: np.ndarray, h: float, axis: int = 0, deriv: int = 1, order: int = 4) -> np.ndarray:
    """Finite-difference derivative of uniform samples along ``axis``.

    Centered stencils of accuracy ``order`` in the interior; near the ends the
    stencil is shifted inward and widened to keep the same accuracy.
    """
    f = np.moveaxis(np.asarray(f), axis, 0)
    n = f.shape[0]
    half = (deriv + 1) // 2 - 1 + order // 2
    width = 2 * half + 1
    edge = order + deriv
    if n < max(width, edge):
        raise ValueError(f"{n} samples are too few for a {max(width, edge)}-point stencil")
    out = np.empty(f.shape, dtype=np.result_type(f, float))
    w = _exact_on_constants(fd_weights(0.0, np.arange(-half, half + 1, dtype=float), deriv)[deriv], half)
    acc = np.zeros((n - 2 * half,) + f.shape[1:], dtype=out.dtype)
    for k in range(width):
        if w[k] != 0.0:
            acc += w[k] * f[k : n - 2 * half + k]
    out[half : n - half] = acc
    for i in list(range(half)) + list(range(n - half, n)):
        lo, hi = _stencil_bounds(i, n, edge)
        wi = _exact_on_constants(fd_weights(float(i), np.arange(lo, hi, dtype=float), deriv)[deriv], i - lo)
        out[i] = np.tensordot(wi, f[lo:hi], axes=(0, 0))
    return np.moveaxis(out / h ** deriv, 0, axis)


def _interval_weights(offsets: np.ndarray) -> np.ndarray:
    """Weights ``w`` with ``sum w_k p(offsets_k) = int_0^1 p`` for low-degree ``p``."""
    p = len(offsets)
    V = np.vander(offsets.astype(float), p, increasing=True).T
    rhs = 1.0 / np.arange(1, p + 1)
    return np.linalg.solve(V, rhs)


def cumulative_along(f: np.ndarray, h: float, axis: int = 0, order: int = 4) -> np.ndarray:
    """Running integral ``F_k = int_{t_0}^{t_k} f`` of uniform samples, ``F_0 = 0``.

    Each interval is integrated with the interpolating polynomial through
    ``order`` nearby samples, so the result is accurate to ``O(h^order)``.
    """
    f = np.moveaxis(np.asarray(f), axis, 0)
    n = f.shape[0]
    if n < order:
        raise ValueError(f"need at least {order} samples")
    inc = np.empty((n - 1,) + f.shape[1:], dtype=np.result_type(f, float))
    lo_int = order // 2 - 1
    w = _interval_weights(np.arange(-lo_int, order - lo_int, dtype=float))
    m = n - order + 1  # intervals with a centered stencil
    acc = np.zeros((m,) + f.shape[1:], dtype=inc.dtype)
    for k in range(order):
        acc += w[k] * f[k : k + m]
    inc[lo_int : lo_int + m] = acc
    for i in list(range(lo_int)) + list(range(lo_int + m, n - 1)):
        lo = min(max(i - lo_int, 0), n - order)
        wi = _interval_weights(np.arange(lo, lo + order, dtype=float) - i)
        inc[i] = np.tensordot(wi, f[lo : lo + order], axes=(0, 0))
    out = np.zeros(f.shape, dtype=inc.dtype)
    np.cumsum(inc * h, axis=0, out=out[1:])
    return np.moveaxis(out, 0, axis)


def interp_stencil(x0: float, h: float, n: int, xq, npts: int = 6):
    """Indices and Lagrange weights for interpolating a uniform grid at ``xq``.

    Returns ``(idx, w)`` of shape ``(len(xq), npts)``.  Stencils are centered on
    the query and shifted inward at the grid ends.
    """
    xq = np.atleast_1d(np.asarray(xq, dtype=float))
    s = (xq - x0) / h
    start = np.floor(s).astype(int) - (npts // 2 - 1)
    start = np.clip(start, 0, n - npts)
    idx = start[:, None] + np.arange(npts)[None, :]
    loc = s - start
    nodes = np.arange(npts, dtype=float)
    w = np.ones((len(xq), npts))
    for k in range(npts):
        for l in range(npts):
            if l != k:
                w[:, k] *= (loc - nodes[l]) / (nodes[k] - nodes[l])
    return idx, w


def interp_along(f: np.ndarray, axis: int, x0: float, h: float, xq, npts: int = 6) -> np.ndarray:
    """Interpolate samples ``f`` (uniform along ``axis``) at points ``xq``.

    The interpolated axis is replaced by an axis of length ``len(xq)``.
    """
    n = f.shape[axis]
    idx, w = interp_stencil(x0, h, n, xq, min(npts, n))
    f = np.moveaxis(f, axis, 0)
    g = f[idx]  # (Q, npts, ...)
    out = np.einsum("qk,qk...->q...", w, g)
    return np.moveaxis(out, 0, axis)


def taylor_coefficients(f, centers, radius, order: int, nodes: int = 64) -> np.ndarray:
    """Taylor coefficients ``f^{(m)}(c) / m!`` for ``m = 0..order`` by Cauchy integrals.

    ``f`` must accept complex arrays.  ``centers`` has shape ``(P,)``;
    ``radius`` is a scalar or shape ``(P,)``.  Returns ``(P, order + 1, ...)``
    where trailing axes are those of ``f``'s values.
    """
    centers = np.atleast_1d(np.asarray(centers, dtype=float))
    rho = np.broadcast_to(np.asarray(radius, dtype=float), centers.shape)
    M = max(nodes, 2 * order + 2)
    th = 2 * np.pi * np.arange(M) / M
    z = centers[:, None] + rho[:, None] * np.exp(1j * th)[None, :]
    vals = np.asarray(f(z))
    coef = np.fft.fft(vals, axis=1) / M
    coef = coef[:, : order + 1]
    scale = rho[:, None] ** (-np.arange(order + 1, dtype=float))
    return coef * scale.reshape(scale.shape + (1,) * (coef.ndim - 2))


def taylor_coefficients_nd(f, center, radius, order: int, nodes: int = 32) -> np.ndarray:
    """Multivariate Taylor coefficients ``D^k f(c)/k!`` on a polydisk.

    ``f`` maps complex points of shape ``(..., d)`` to values of shape ``(...)``.
    Returns an array of shape ``(order + 1,) * d`` indexed by ``k``.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    d = center.shape[0]
    M = max(nodes, 2 * order + 2)
    th = 2 * np.pi * np.arange(M) / M
    circ = radius * np.exp(1j * th)
    grids = np.meshgrid(*([circ] * d), indexing="ij")
    Z = center + np.stack(grids, axis=-1)
    vals = np.asarray(f(Z))
    coef = np.fft.fftn(vals) / M ** d
    sl = tuple(slice(0, order + 1) for _ in range(d))
    coef = coef[sl]
    k = np.indices((order + 1,) * d).sum(axis=0)
    return coef * float(radius) ** (-k)
