"""Graded multi-index tables.

Multi-indices ``j = (j_1, ..., j_d)`` are stored as rows of an integer array.
Tables list every index with ``|j| <= J`` ordered by degree and, within one
degree, by decreasing first entry (then second, ...).  With this ordering the
indices of degree ``<= n`` form a prefix of the table, so truncating a basis or
an operator matrix to lower degree is a plain slice.
"""

from __future__ import annotations

import math
from functools import cached_property

import numpy as np

__all__ = [
    "MultiIndexTable",
    "enumerate_upto",
    "degree",
    "factorial",
    "log_factorial",
]


def degree(j) -> int:
    return int(sum(int(x) for x in j))


def factorial(j) -> int:
    """Exact multi-index factorial ``j! = prod(j_k!)`` as a Python integer."""
    out = 1
    for x in j:
        if int(x) < 0:
            raise ValueError(f"negative multi-index entry in {tuple(j)}")
        out *= math.factorial(int(x))
    return out


def log_factorial(j) -> float:
    return float(sum(math.lgamma(int(x) + 1.0) for x in j))


def _grade(d: int, L: int):
    """Indices of degree exactly ``L`` in decreasing lexicographic order."""
    if d == 1:
        yield (L,)
        return
    for first in range(L, -1, -1):
        for rest in _grade(d - 1, L - first):
            yield (first,) + rest


class MultiIndexTable:
    """All ``d``-dimensional multi-indices of degree at most ``J``.

    Parameters
    ----------
    d : int
        Dimension, at least 1.
    J : int
        Maximal degree, at least 0.
    """

    def __init__(self, d: int, J: int):
        if d < 1:
            raise ValueError("multi-index dimension must be >= 1")
        if J < 0:
            raise ValueError("maximal degree must be >= 0")
        self.d = int(d)
        self.J = int(J)
        rows = [j for L in range(self.J + 1) for j in _grade(self.d, L)]
        self.indices = np.array(rows, dtype=np.int64).reshape(-1, self.d)
        self.indices.setflags(write=False)
        self._lookup = {tuple(int(x) for x in j): k for k, j in enumerate(rows)}

    def __len__(self) -> int:
        return self.indices.shape[0]

    def __getitem__(self, k):
        return tuple(int(x) for x in self.indices[k])

    def __iter__(self):
        return (self[k] for k in range(len(self)))

    def __repr__(self) -> str:
        return f"MultiIndexTable(d={self.d}, J={self.J}, size={len(self)})"

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.indices.sum(axis=1)

    def offset(self, j) -> int:
        """Position of ``j`` in the table."""
        key = tuple(int(x) for x in j)
        if len(key) != self.d:
            raise ValueError(f"expected a {self.d}-dimensional multi-index, got {key}")
        try:
            return self._lookup[key]
        except KeyError:
            raise ValueError(f"multi-index {key} is not in a table of degree {self.J}") from None

    def prefix(self, n: int) -> int:
        """Number of indices of degree ``<= n`` (clipped to the table)."""
        if n < 0:
            return 0
        n = min(n, self.J)
        return math.comb(n + self.d, self.d)

    def grade_slice(self, L: int) -> slice:
        return slice(self.prefix(L - 1), self.prefix(L))

    def neighbor(self, k: int, axis: int, step: int) -> int:
        """Offset of ``j + step * e_axis`` for ``j = table[k]``, or -1 if absent."""
        j = list(self[k])
        j[axis] += step
        if j[axis] < 0 or sum(j) > self.J:
            return -1
        return self._lookup[tuple(j)]

    def truncated(self, J: int) -> "MultiIndexTable":
        return MultiIndexTable(self.d, J)


def enumerate_upto(d: int, J: int) -> MultiIndexTable:
    return MultiIndexTable(d, J)
