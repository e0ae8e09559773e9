"""Absorbing-Markov-chain oracle for single visits, plus structured inverses.

:func:`build_chain` writes down the transient generator of one server visit
on a finite box of queue lengths.  Leaving the box is an explicit
``overflow`` absorption cause, so the truncation error of the oracle is a
measured number.  :func:`oracle_visit_pgf` then gives ``E[z^{N^e} | N^b]``
by one sparse solve, independently of the closed-form kernels.

The Toeplitz and Sherman-Morrison helpers reproduce single entries of the
inverse visit matrices from the two roots of the visit quadratic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DegenerateRoots, SingularUpdate
from .model import Autonomous, Exhaustive, KLimited, PollingModel, TimeLimited

TIMER = "timer"
EMPTY = "empty"
KDEP = "kdep"
OVERFLOW = "overflow"


# --------------------------------------------------------------------------
# tridiagonal Toeplitz inverse and rank-one corrections


def _roots(lam, s, b):
    s = complex(s)
    disc = np.sqrt(s * s - 4.0 * lam / b)
    if abs(disc) < 1e-14:
        raise DegenerateRoots("double root of lam r^2 - s r + 1/b")
    plus, minus = s + disc, s - disc
    big = plus if abs(plus) >= abs(minus) else minus
    r2 = big / (2.0 * lam)
    r1 = 2.0 / (b * big)
    return r1, r2


def toeplitz_inverse_entry(i, j, L: int, lam: float, s, b: float):
    """Entry ``(i, j)`` (1-based) of the inverse of the ``L x L`` tridiagonal
    Toeplitz matrix with diagonal ``-s``, super-diagonal ``lam`` and
    sub-diagonal ``1/b``.  ``i`` and ``j`` may be broadcastable arrays."""
    r1, r2 = _roots(lam, s, b)
    i = np.asarray(i)
    j = np.asarray(j)
    den = lam * (r1 - r2) * (r1 ** (L + 1) - r2 ** (L + 1))
    upper = -(r1**i - r2**i) * (r1 ** (L + 1 - j) - r2 ** (L + 1 - j)) / den
    lower = (r1 ** (-j) - r2 ** (-j)) * (r1 ** (L + 1) * r2**i - r2 ** (L + 1) * r1**i) / den
    out = np.where(i <= j, upper, lower)
    return complex(out) if out.ndim == 0 else out


def toeplitz_inverse(L: int, lam: float, s, b: float) -> np.ndarray:
    idx = np.arange(1, L + 1)
    return toeplitz_inverse_entry(idx[:, None], idx[None, :], L, lam, s, b)


def sm_corrected_entry(i, j, L: int, lam: float, s, b: float, first: bool = True, last: bool = True):
    """Entry of ``(T + (1/b) u u^T + lam v v^T)^{-1}`` with ``u = e_1``, ``v = e_L``.

    ``first``/``last`` switch the two diagonal bumps on or off; ``i`` and
    ``j`` may be broadcastable arrays.
    """
    t = lambda p, q: toeplitz_inverse_entry(p, q, L, lam, s, b)  # noqa: E731

    if first:
        den1 = b + t(1, 1)
        if abs(den1) < 1e-14:
            raise SingularUpdate("first Sherman-Morrison denominator vanishes")

        def m(p, q):
            return t(p, q) - t(p, 1) * t(1, q) / den1
    else:
        m = t

    if not last:
        return m(i, j)
    den2 = 1.0 + lam * m(L, L)
    if abs(den2) < 1e-14:
        raise SingularUpdate("second Sherman-Morrison denominator vanishes")
    return m(i, j) - lam * m(i, L) * m(L, j) / den2


def dense_visit_matrix(L: int, lam: float, s, b: float, first: bool = True, last: bool = True) -> np.ndarray:
    """The matrix whose inverse :func:`sm_corrected_entry` returns."""
    T = np.diag(np.full(L, -complex(s))) + np.diag(np.full(L - 1, lam), 1) + np.diag(np.full(L - 1, 1.0 / b), -1)
    T = T.astype(complex)
    if first:
        T[0, 0] += 1.0 / b
    if last:
        T[-1, -1] += lam
    return T


# --------------------------------------------------------------------------
# truncated chains


@dataclass
class TruncatedChain:
    """Transient part of one visit to queue ``i`` on a finite box.

    States are tuples ``(n_1, ..., n_M)`` plus a departure counter for the
    k-limited variant, ordered lexicographically with the served queue
    varying fastest (then the counter, then the remaining queues).
    """

    model: PollingModel
    i: int
    variant: str  # "A", "T", "k", "E"
    lows: np.ndarray  # per-axis lower bound of the box (served axis 0 or 1)
    highs: np.ndarray  # per-axis inclusive upper bound
    k: int
    states: np.ndarray  # (n_states, M + 1); last column is the departure count
    generator: sp.csr_matrix
    absorption: dict = field(default_factory=dict)  # cause -> rate per state

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    def index(self, state) -> int:
        state = tuple(int(v) for v in state)
        if len(state) == self.model.M:
            state = state + (0,)
        return self._lookup[state]

    def __post_init__(self):
        self._lookup = {tuple(int(v) for v in row): n for n, row in enumerate(self.states)}


def _variant(disc) -> str:
    if isinstance(disc, Autonomous):
        return "A"
    if isinstance(disc, TimeLimited):
        return "T"
    if isinstance(disc, KLimited):
        return "k"
    if isinstance(disc, Exhaustive):
        return "E"
    raise TypeError(disc)


def build_chain(model: PollingModel, i: int, bounds) -> TruncatedChain:
    """Generator of a visit to queue ``i`` on the box ``n_m <= bounds[m]``.

    ``bounds[i]`` is ``L - 1``, the largest served-queue length kept.
    """
    M = model.M
    disc = model.queues[i].discipline
    var = _variant(disc)
    k = disc.k if var == "k" else 1
    lam = model.lambdas
    mu = 1.0 / model.queues[i].mean_service
    alpha = getattr(disc, "alpha", 0.0)
    nxt = i + 1 if (model.is_tandem and i + 1 < M) else None

    highs = np.asarray(bounds, dtype=int)
    lows = np.zeros(M, dtype=int)
    if var != "A":
        lows[i] = 1

    # served axis fastest, then the departure counter, then n_2.. in reverse
    # significance (n_M slowest) -> enumerate with C-order over reversed axes
    other = [m for m in range(M) if m != i][::-1]
    axes_ranges = [np.arange(lows[m], highs[m] + 1) for m in other] + [np.arange(k)] + [np.arange(lows[i], highs[i] + 1)]
    mesh = np.meshgrid(*axes_ranges, indexing="ij")
    flat = [g.ravel() for g in mesh]
    states = np.zeros((flat[0].size, M + 1), dtype=int)
    for pos, m in enumerate(other):
        states[:, m] = flat[pos]
    states[:, M] = flat[len(other)]
    states[:, i] = flat[-1]
    ns = states.shape[0]
    lookup = {tuple(row): n for n, row in enumerate(states)}

    rows, cols, vals = [], [], []
    out_rate = np.zeros(ns)
    causes = {TIMER: np.zeros(ns), EMPTY: np.zeros(ns), KDEP: np.zeros(ns), OVERFLOW: np.zeros(ns)}

    def move(src, dst_state, rate):
        if rate == 0:
            return
        out_rate[src] += rate
        target = lookup.get(tuple(dst_state))
        if target is None:
            causes[OVERFLOW][src] += rate
        else:
            rows.append(src)
            cols.append(target)
            vals.append(rate)

    for n, st in enumerate(states):
        ni, j = st[i], st[M]
        for m in range(M):
            if lam[m] > 0:
                dst = st.copy()
                dst[m] += 1
                move(n, dst, lam[m])
        if var in ("A", "T"):
            out_rate[n] += alpha
            causes[TIMER][n] += alpha
        if ni >= 1:
            ends_visit = (var in ("T", "k", "E") and ni == 1) or (var == "k" and j == k - 1)
            if ends_visit:
                # the k-th departure that empties the queue counts as "empty"
                cause = EMPTY if ni == 1 else KDEP
                out_rate[n] += mu
                causes[cause][n] += mu
            else:
                dst = st.copy()
                dst[i] -= 1
                if var == "k":
                    dst[M] += 1
                if nxt is not None:
                    dst[nxt] += 1
                move(n, dst, mu)

    Q = sp.coo_matrix((vals, (rows, cols)), shape=(ns, ns)).tocsr()
    Q = Q - sp.diags(out_rate)
    return TruncatedChain(model, i, var, lows, highs, k, states, Q.tocsr(), causes)


@dataclass
class ExitDistribution:
    chain: TruncatedChain
    flux: dict  # cause -> probability of absorbing from each state with that cause

    def total(self) -> float:
        return float(sum(f.sum() for f in self.flux.values()))

    @property
    def overflow(self) -> float:
        return float(self.flux[OVERFLOW].sum())

    def exit_states(self, cause: str) -> np.ndarray:
        """Visit-end queue vectors reached by absorbing with ``cause``."""
        ch = self.chain
        ne = ch.states[:, : ch.model.M].copy()
        if cause in (EMPTY, KDEP):
            ne[:, ch.i] -= 1
            if ch.model.is_tandem and ch.i + 1 < ch.model.M:
                ne[:, ch.i + 1] += 1
        return ne


def absorption_exit_distribution(chain: TruncatedChain, initial) -> ExitDistribution:
    """Where and why the visit ends, from one sparse solve."""
    e = np.zeros(chain.n_states)
    e[chain.index(initial)] = 1.0
    # expected occupation times: tau Q = -e
    tau = spla.spsolve(chain.generator.T.tocsc(), -e)
    if not np.all(np.isfinite(tau)):
        raise np.linalg.LinAlgError("singular visit generator")
    return ExitDistribution(chain, {c: tau * r for c, r in chain.absorption.items()})


def oracle_visit_pgf(chain: TruncatedChain, initial, z) -> complex:
    """``E[z^{N^e} | N^b = initial]`` on the truncated chain (overflow excluded)."""
    z = np.asarray(z, dtype=complex)
    M = chain.model.M
    initial = tuple(int(v) for v in initial)
    if chain.variant != "A" and initial[chain.i] == 0:
        # server leaves an empty queue at once
        return complex(np.prod(z ** np.asarray(initial)))
    ex = absorption_exit_distribution(chain, initial)
    total = 0j
    for cause in (TIMER, EMPTY, KDEP):
        f = ex.flux[cause]
        if not f.any():
            continue
        ne = ex.exit_states(cause)
        total += np.sum(f * np.prod(z[None, :M] ** ne, axis=1))
    return complex(total)


@dataclass
class OracleResult:
    value: complex
    overflow: float
    bounds: tuple


def oracle_conditional_pgf(model: PollingModel, i: int, initial, z, overflow_tol: float = 1e-8, start: int = 16, max_bound: int = 512) -> OracleResult:
    """Oracle PGF with the box grown until the overflow mass is below ``overflow_tol``."""
    initial = tuple(int(v) for v in initial)
    z = np.atleast_2d(np.asarray(z, dtype=complex))
    bound = max(start, 2 * max(initial) + 8)
    while True:
        chain = build_chain(model, i, [bound] * model.M)
        if chain.variant != "A" and initial[i] == 0:
            vals = [oracle_visit_pgf(chain, initial, zz) for zz in z]
            return OracleResult(np.array(vals), 0.0, (bound,) * model.M)
        ex = absorption_exit_distribution(chain, initial)
        if ex.overflow < overflow_tol or bound >= max_bound:
            break
        bound *= 2
    if ex.overflow >= overflow_tol:
        raise RuntimeError(f"oracle overflow {ex.overflow:.2e} still above {overflow_tol:.1e} at bound {bound}")
    vals = []
    for zz in z:
        total = 0j
        for cause in (TIMER, EMPTY, KDEP):
            f = ex.flux[cause]
            if f.any():
                total += np.sum(f * np.prod(zz[None, :] ** ex.exit_states(cause), axis=1))
        vals.append(total)
    return OracleResult(np.array(vals), ex.overflow, (bound,) * model.M)
