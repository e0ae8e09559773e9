"""Closed-form visit kernels: visit-begin PGF (beta) -> visit-end PGF (gamma).

Every kernel works on *sections* of beta along the served axis ``i``::

    S[v, p] = E[1{N_i = v} prod_{m != i} z_m^{N_m}]   at reduced point p,

so that ``beta(z) = sum_v S[v, p] z_i^v`` and ``beta(z*_i) = sum_v S[v, p] r^v``.
The kernels return ``gamma`` on the product ``reduced points x served-axis
values`` as an array of shape ``(P, G)``.  :func:`apply_visit` wires this to
the torus grid and back to a coefficient tensor.

All formulas are written in cancelled form, so none of them divides by a
factor that vanishes on the unit torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import lattice
from .errors import DegenerateRoots, PoleOnGrid, RemovableSingularity, SeriesDivergence
from .model import Autonomous, Exhaustive, KLimited, PollingModel, TimeLimited
from .pgf import CoeffTensor, TorusGrid, default_grid_size, sections_at, served_sections

POLE_TOL = 1e-12
ROOT_SEPARATION = 1e-10
SERIES_EPS = 1e-14

TIMER = "timer"
NO_TIMER = "no_timer"


@dataclass(frozen=True)
class QuadParams:
    """Visit quadratic ``P(w) = lam w^2 - s w + const`` at reduced points.

    ``const`` is ``1/b_i`` for cyclic routing and ``z_{i+1}/b_i`` in a tandem.
    ``r1`` is the root inside the unit disc, ``r2`` the one outside (``inf``
    when ``lam == 0`` and the quadratic is linear).  For the no-timer variant
    ``x = s/lam`` and ``x0 = x - 1`` are the k-limited scalars.
    """

    lam: float
    b: float
    s: np.ndarray
    const: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    variant: str

    def P(self, w):
        w = np.asarray(w)
        extra = (None,) * (w.ndim - self.s.ndim)
        s = self.s[(...,) + extra]
        c = self.const[(...,) + extra]
        return self.lam * w * w - s * w + c

    @property
    def x(self):
        return self.s / self.lam

    @property
    def x0(self):
        return self.x - 1.0


def _full_points(z_minus_i, i):
    z_minus_i = np.asarray(z_minus_i, dtype=complex)
    if z_minus_i.ndim == 1:
        z_minus_i = z_minus_i.reshape(1, -1)
    return np.insert(z_minus_i, i, 1.0, axis=1)


def next_queue_z(model: PollingModel, i: int, zfull):
    """``z_{i+1}`` for tandem routing (1 after the last queue), else ones."""
    if model.is_tandem and i + 1 < model.M:
        return zfull[:, i + 1]
    return np.ones(zfull.shape[0], dtype=complex)


def quad_roots(model: PollingModel, i: int, z_minus_i, variant: str = TIMER, alpha: float | None = None) -> QuadParams:
    """Roots of the visit quadratic at each reduced point, split by modulus."""
    zfull = _full_points(z_minus_i, i)
    q = model.queues[i]
    lam, b = q.lam, q.mean_service
    load = (np.delete(model.lambdas, i) * (1.0 - np.delete(zfull, i, axis=1))).sum(axis=1)
    if variant == TIMER:
        a = q.discipline.alpha if alpha is None else alpha
        s = lam + 1.0 / b + a + load
    elif variant == NO_TIMER:
        s = lam + 1.0 / b + load
    else:
        raise ValueError(f"unknown variant {variant!r}")
    const = next_queue_z(model, i, zfull) / b

    if lam == 0:
        r1 = const / s
        r2 = np.full_like(r1, np.inf)
        return QuadParams(lam, b, s, const, r1, r2, variant)

    disc = np.sqrt(s * s - 4.0 * lam * const)
    plus, minus = s + disc, s - disc
    big = np.where(np.abs(plus) >= np.abs(minus), plus, minus)
    r2 = big / (2.0 * lam)
    # product of the roots is const/lam; avoids cancellation in the small root
    r1 = 2.0 * const / big
    if np.any(np.abs(np.abs(r2) - np.abs(r1)) < ROOT_SEPARATION):
        raise DegenerateRoots("visit quadratic has (numerically) equal root moduli")
    return QuadParams(lam, b, s, const, r1, r2, variant)


def _served_values(S, zi):
    """beta on the (reduced point) x (served value) product, shape ``(P, G)``."""
    V = np.asarray(zi, dtype=complex)[None, :] ** np.arange(S.shape[0])[:, None]
    return S.T @ V


def _pole_guard(Pz):
    if np.any(np.abs(Pz) < POLE_TOL):
        raise PoleOnGrid("visit quadratic vanishes at an evaluation node")


def visit_autonomous(model: PollingModel, i: int, S, zred, zi):
    """Autonomous-server kernel (cyclic or tandem)."""
    alpha = model.queues[i].discipline.alpha
    zi = np.asarray(zi, dtype=complex)
    qp = quad_roots(model, i, zred, TIMER)
    zn = next_queue_z(model, i, _full_points(zred, i))
    Pz = qp.P(zi[None, :])
    _pole_guard(Pz)
    gap = zn - qp.r1
    if np.any(np.abs(gap) < POLE_TOL):
        raise RemovableSingularity("z_{i+1} coincides with the inner root")
    bstar = sections_at(S, qp.r1)
    beta = _served_values(S, zi)
    first = (zn[:, None] - zi[None, :]) * (qp.r1 * bstar / gap)[:, None]
    return alpha / Pz * (first - zi[None, :] * beta)


def visit_time_limited(model: PollingModel, i: int, S, zred, zi):
    """Time-limited kernel (cyclic or tandem); an empty queue is left at once."""
    alpha = model.queues[i].discipline.alpha
    zi = np.asarray(zi, dtype=complex)
    qp = quad_roots(model, i, zred, TIMER)
    Pz = qp.P(zi[None, :])
    _pole_guard(Pz)
    bstar = sections_at(S, qp.r1)[:, None]
    beta = _served_values(S, zi)
    w = alpha * zi[None, :] / Pz
    return (1.0 + w) * bstar - w * beta


def visit_exhaustive(model: PollingModel, i: int, S, zred, zi):
    """Exhaustive kernel: substitute the busy-period root for ``z_i``."""
    qp = quad_roots(model, i, zred, NO_TIMER)
    g = sections_at(S, qp.r1)
    return np.repeat(g[:, None], np.size(zi), axis=1)


def _k_scalars(model, i, zred):
    q = model.queues[i]
    qp = quad_roots(model, i, zred, NO_TIMER)
    # u = lam * x stays finite when lam = 0
    return q.lam, q.mean_service, qp.s, qp


def visit_k1(model: PollingModel, i: int, S, zred, zi):
    """1-limited closed form: ``A1 beta + (1 - A1) beta|_{z_i=0}``."""
    lam, b, u, _ = _k_scalars(model, i, zred)
    zi = np.asarray(zi, dtype=complex)[None, :]
    beta = _served_values(S, zi[0])
    b0 = S[0][:, None]
    den = b * (u[:, None] - lam * zi)
    _pole_guard(den)
    return b0 + (beta - b0) / (zi * den)


def visit_k2(model: PollingModel, i: int, S, zred, zi):
    """2-limited closed form with the ``N_i = 0`` and ``N_i = 1`` slices."""
    lam, b, u, _ = _k_scalars(model, i, zred)
    zi = np.asarray(zi, dtype=complex)[None, :]
    beta = _served_values(S, zi[0])
    b0 = S[0][:, None]
    b1 = S[1][:, None] if S.shape[0] > 1 else np.zeros_like(b0)
    uu = u[:, None]
    d = uu - lam * zi
    _pole_guard(d)
    A2 = 1.0 / (zi * zi * b * b * d * d)
    B2 = 1.0 / (zi * b * uu) - 1.0 / (zi * zi * b * b * uu * d)
    return b0 + A2 * (beta - b0) + B2 * zi * b1


def series_width(n: int, k: int, xmin: float) -> int:
    """Number of j-terms so that the neglected c-weighted geometric tail is < 1e-17."""
    q = 1.0 / xmin
    J = k + 1
    while math.comb(2 * k + n + J + 1, k) * q ** (J - k) > 1e-17:
        J += 1
        if J > 100000:
            raise SeriesDivergence("series width exceeded 1e5 terms")
    return n + J


def visit_k_general(model: PollingModel, i: int, S, zred, zi, k: int | None = None, chunk: int = 64):
    """k-limited kernel from the lattice-path series, any ``k >= 1``.

    For ``N_i = i1 >= 1`` at visit start the conditional visit-end PGF is
    ``y^i1 + T1 + T3(z_i) + T4`` with ``T1, T4`` constant in ``z_i`` and
    ``T3 = sum_j w_j z_i^{j-1} / (x - z_i)``; the ``i1 = 0`` slice passes
    through unchanged.
    """
    q = model.queues[i]
    if k is None:
        k = q.discipline.k
    lam, b = q.lam, q.mean_service
    if lam <= 0:
        raise ValueError("general k-limited path needs lambda_i > 0")
    zi = np.asarray(zi, dtype=complex)
    qp = quad_roots(model, i, zred, NO_TIMER)
    x, y = qp.x, qp.r1
    zmax = float(np.max(np.abs(zi))) if zi.size else 0.0
    if np.any(zmax / np.abs(x) >= 1.0) or np.any(np.abs(y / x) >= 1.0):
        raise SeriesDivergence("|z_i/x| or |y/x| >= 1")

    n = S.shape[0] - 1
    out = np.repeat(S[0][:, None], zi.size, axis=1).astype(complex)
    if n == 0:
        return out
    W = series_width(n, k, float(np.min(np.abs(x) / max(zmax, np.max(np.abs(y)), 1e-300))))
    ck1 = lattice.c_table_float(k - 1, n, W)  # rows i1 = 1..n, cols j = 1..W
    ck = lattice.c_table_float(k, n, W)
    i1 = np.arange(1, n + 1)[:, None]
    j = np.arange(1, W + 1)[None, :]
    dmat = i1 - j  # exponent offset i1 - j
    lbk = (lam * b) ** k
    V = zi[None, :] ** np.arange(W)[:, None]  # z_i^{j-1}

    for start in range(0, x.size, chunk):
        sl = slice(start, start + chunk)
        xs, ys, Ss = x[sl], y[sl], S[1:, sl]
        # x^{i1 - j} only where the coefficient is non-zero, avoiding 0 * inf
        d1 = np.where(ck1 != 0, dmat, 0)
        d2 = np.where(ck != 0, dmat, 0)
        X1 = xs[None, None, :] ** d1[:, :, None]
        X2 = xs[None, None, :] ** d2[:, :, None]
        w3 = np.einsum("ik,ij,ijk->jk", Ss, ck1, X1) * (xs ** (2 - 2 * k) / lbk)[None, :]
        yj = ys[None, :] ** np.arange(1, W + 1)[:, None]  # (W, K)
        t4 = -np.einsum("ik,ij,ijk,jk->k", Ss, ck, X2, yj) * xs ** (-2 * k) / lbk
        ipow = np.arange(1, n + 1)[:, None]
        t1 = -np.einsum("ik,i,ik->k", Ss, ck1[:, 0], xs[None, :] ** (ipow - 2 * k)) / lbk
        t2 = sections_at(S[:, sl], ys) - S[0, sl]
        t3 = (w3.T @ V) / (xs[:, None] - zi[None, :])
        out[sl] += (t1 + t2 + t4)[:, None] + t3
    return out


def visit_k_limited(model: PollingModel, i: int, S, zred, zi, path: str = "auto"):
    """k-limited kernel; ``path`` is ``closed`` (k <= 2), ``general`` or ``auto``."""
    k = model.queues[i].discipline.k
    if path == "auto":
        path = "closed" if k <= 2 else "general"
    if path == "closed":
        if k == 1:
            return visit_k1(model, i, S, zred, zi)
        if k == 2:
            return visit_k2(model, i, S, zred, zi)
        raise ValueError("closed-form path exists for k in {1, 2} only")
    return visit_k_general(model, i, S, zred, zi, k=k)


def tandem_visit(model: PollingModel, i: int, S, zred, zi):
    if not model.is_tandem:
        raise ValueError("tandem_visit needs tandem routing")
    disc = model.queues[i].discipline
    if isinstance(disc, Autonomous):
        return visit_autonomous(model, i, S, zred, zi)
    if isinstance(disc, TimeLimited):
        return visit_time_limited(model, i, S, zred, zi)
    raise ValueError("tandem kernels exist for autonomous and time-limited disciplines only")


def kernel_values(model: PollingModel, i: int, S, zred, zi, k_path: str = "auto"):
    disc = model.queues[i].discipline
    if isinstance(disc, Autonomous):
        return visit_autonomous(model, i, S, zred, zi)
    if isinstance(disc, TimeLimited):
        return visit_time_limited(model, i, S, zred, zi)
    if isinstance(disc, KLimited):
        return visit_k_limited(model, i, S, zred, zi, path=k_path)
    if isinstance(disc, Exhaustive):
        return visit_exhaustive(model, i, S, zred, zi)
    raise TypeError(f"unsupported discipline {disc!r}")


def gamma_at(model: PollingModel, i: int, beta: CoeffTensor, z, k_path: str = "auto"):
    """Visit-end PGF at arbitrary points ``z`` of shape ``(P, M)`` (or ``(M,)``)."""
    z = np.asarray(z, dtype=complex)
    single = z.ndim == 1
    z = z.reshape(1, -1) if single else z
    zred = np.delete(z, i, axis=1)
    S = served_sections(beta, i, zred=zred)
    vals = np.array(
        [kernel_values(model, i, S[:, [p]], zred[[p]], z[p, [i]], k_path=k_path)[0, 0] for p in range(z.shape[0])]
    )
    return vals[0] if single else vals


@dataclass
class VisitResult:
    gamma: CoeffTensor
    grid_values: np.ndarray  # gamma on the full torus grid, before truncation
    norm_error: float  # |gamma(1,...,1) - 1| given the input mass
    tail: float  # mass beyond n_max discarded by truncation


def apply_visit(model: PollingModel, i: int, beta: CoeffTensor, G: int | None = None, k_path: str = "auto") -> VisitResult:
    """Apply queue ``i``'s kernel on the torus grid and return the truncated tensor."""
    M, n = beta.M, beta.n_max
    G = G or default_grid_size(n)
    grid = TorusGrid(G, M)
    S = served_sections(beta, i, G=G)
    zred = grid.reduced_points(i)
    vals = kernel_values(model, i, S, zred, grid.nodes, k_path=k_path)
    full = np.moveaxis(vals.reshape((G,) * M), -1, i)
    coeffs = np.fft.fftn(full, norm="forward")
    kept = coeffs[(slice(0, n + 1),) * M]
    mass_in = beta.total_mass()
    norm_error = float(abs(full[(0,) * M] - mass_in))
    tail = float(np.real(full[(0,) * M] - kept.sum()))
    return VisitResult(CoeffTensor(kept, f"q{i + 1}:end"), full, norm_error, tail)
