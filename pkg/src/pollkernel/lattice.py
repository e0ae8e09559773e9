"""Path-count coefficients ``c^n(i, j)`` for the k-limited visit kernel.

``c^n(i, j)`` counts the ``n``-step paths from state ``i`` to state ``j`` on
the positive integers when a step may move up by any amount but down by at
most one.  Entries of the ``n``-th power of the departure operator are
``c^n(i, j) x^{-n+i-j}``.

Three independent routes are provided: the prefix-sum recurrence, the
binomial closed forms, and brute-force path counting on the level graph.
Indices ``i, j`` are 1-based throughout, as in the combinatorics.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np


@dataclass(frozen=True)
class CTable:
    n: int
    values: np.ndarray  # object array of python ints; values[i-1, j-1] = c^n(i, j)

    @property
    def i_max(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    def __call__(self, i: int, j: int) -> int:
        return int(self.values[i - 1, j - 1])


def _identity(i_max: int, width: int, dtype) -> np.ndarray:
    out = np.zeros((i_max, width), dtype=dtype)
    for r in range(min(i_max, width)):
        out[r, r] = 1
    return out


def _recurrence(n: int, i_max: int, width: int, dtype) -> np.ndarray:
    # c^0 = identity reproduces the stated base case c^1 after one step
    c = _identity(i_max, width + n, dtype)
    for level in range(1, n + 1):
        w = width + n - level
        c = np.cumsum(c[:, : w + 1], axis=1)[:, 1 : w + 1]
    return c


def c_recurrence(n: int, i_max: int, width: int) -> CTable:
    """Exact table via ``c^n(i, j) = sum_{l <= j+1} c^{n-1}(i, l)``."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return CTable(n, _recurrence(n, i_max, width, object))


def c_table_float(n: int, i_max: int, width: int) -> np.ndarray:
    """Float64 table for the kernel series (exact while entries stay below 2**53)."""
    return _recurrence(n, i_max, width, np.float64)


def c_closed_form(n: int, i: int, j: int) -> int:
    """Binomial closed forms for the unbounded chain."""
    if i < 1 or j < 1:
        return 0
    if n == 0:
        return int(i == j)
    if n == 1:
        return int(i == 1 or j >= i - 1)
    if i == 1:
        return comb(2 * n + j - 2, n - 1) - comb(2 * n + j - 2, n + j)
    if i < n:
        return comb(2 * n + j - i - 1, n - 1) - comb(2 * n + j - i - 1, n + j)
    if i == n:
        return comb(n + j - 1, n - 1)
    # rows below n: c^n(p + n, j) = C(n + j - p - 1, n - 1), zero for j < p
    p = i - n
    if j < p:
        return 0
    return comb(n + j - p - 1, n - 1)


def c_bruteforce(n: int, i: int, j: int, graph_bound: int | None = None) -> int:
    """Count level-graph paths by integer adjacency-matrix powers.

    An edge joins ``s`` at one level to ``t`` at the next iff ``t >= s - 1``.
    Paths ending at ``j`` never pass above ``j + n``, so a bound of
    ``i + j + 2n`` states leaves the count untouched.
    """
    bound = graph_bound if graph_bound is not None else i + j + 2 * n
    if bound < max(i, j):
        raise ValueError("graph_bound too small")
    # states 1..bound -> indices 0..bound-1
    A = [[1 if t >= s - 1 else 0 for t in range(1, bound + 1)] for s in range(1, bound + 1)]
    row = [0] * bound
    row[i - 1] = 1
    for _ in range(n):
        row = [sum(row[s] * A[s][t] for s in range(bound) if row[s]) for t in range(bound)]
    return row[j - 1]


def zero_region(n: int, i: int, j: int) -> bool:
    """True where ``c^n(i, j)`` vanishes: ``i >= n + 2`` and ``j < i - n``."""
    return i >= n + 2 and j < i - n
