"""Fixed-point iteration over server cycles.

One cycle maps the visit-end PGFs of the previous cycle to new ones::

    beta_1 = gamma_M * C_M,  gamma_i = K_i(beta_i),  beta_{i+1} = gamma_i * C_i

and the iteration starts from an empty system at the first visit to queue 1.
Convergence is measured as the sup-norm over the torus grid of successive
visit-end PGFs.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DivergenceDetected, MaxCyclesExceeded
from .kernels import apply_visit
from .model import PollingModel, switchover_arrival_pgf, validate_model
from .pgf import (
    CoeffTensor,
    TorusGrid,
    default_grid_size,
    mean,
    point_mass,
    project_to_probability,
    resize,
    tensor_to_grid,
)

log = logging.getLogger(__name__)


@dataclass
class SolveOptions:
    n_max: int | None = None  # default 64 for M <= 2, 32 for M = 3, 16 beyond
    grid: int | None = None  # default: smallest power of two >= 2 (n_max + 1)
    max_cycles: int = 2000
    tol: float = 1e-10
    tail_tol: float = 1e-8  # truncation budget; exceeding it doubles n_max
    n_max_cap: int | None = None  # default 4 * n_max
    divergence_tail: float = 1e-3
    mass_drift: float = 1e-4
    renorm_tol: float = 1e-6
    # linear-growth guard: the cycle-over-cycle increase of the total mean
    # queue length stops shrinking for an unstable system
    drift_window: int = 50
    drift_ratio: float = 0.9
    drift_min: float = 1e-4
    tol_im: float = 1e-9
    tol_neg: float = 1e-9
    k_path: str = "auto"

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.n_max is not None and self.grid is not None and self.grid < self.n_max + 1:
            raise ValueError("grid must be >= n_max + 1")

    def resolved_n_max(self, M: int) -> int:
        if self.n_max is not None:
            return self.n_max
        return 64 if M <= 2 else 32 if M == 3 else 16


@dataclass
class ConvergenceReport:
    converged: bool
    cycles: int
    residual: float
    residual_trace: list = field(default_factory=list)
    tail: float = 0.0
    norm_error: float = 0.0
    n_max: int = 0
    grid: int = 0
    means: dict = field(default_factory=dict)
    message: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class StationarySolution:
    begin: list  # CoeffTensor per queue, visit-begin epoch
    end: list  # CoeffTensor per queue, visit-end epoch
    report: ConvergenceReport

    def means(self) -> dict:
        return epoch_means(self.begin, self.end)


def epoch_means(begin, end) -> dict:
    M = len(end)
    out = {}
    for q in range(M):
        out[f"q{q + 1}"] = {
            "begin": [mean(begin[q], m) for m in range(M)],
            "end": [mean(end[q], m) for m in range(M)],
        }
    return out


@dataclass
class CycleResult:
    betas: list
    gammas: list
    tail: float
    norm_error: float


class _SwitchoverCache:
    def __init__(self, model: PollingModel):
        self.model = model
        self._grids = {}

    def values(self, q: int, G: int) -> np.ndarray:
        key = (q, G)
        if key not in self._grids:
            M = self.model.M
            pts = TorusGrid(G, M).points()
            vals = switchover_arrival_pgf(self.model.switchovers[q], self.model.lambdas, pts)
            self._grids[key] = vals.reshape((G,) * M)
        return self._grids[key]


def apply_switchover(t: CoeffTensor, model: PollingModel, q: int, G: int, cache: _SwitchoverCache | None = None):
    """Multiply by the arrival PGF of switch-over ``q``; returns (tensor, tail)."""
    cache = cache or _SwitchoverCache(model)
    vals = tensor_to_grid(t, G) * cache.values(q, G)
    coeffs = np.fft.fftn(vals, norm="forward")
    n = t.n_max
    kept = coeffs[(slice(0, n + 1),) * t.M]
    tail = float(np.real(vals[(0,) * t.M] - kept.sum()))
    return CoeffTensor(kept, f"q{(q + 1) % model.M + 1}:begin"), tail


def cycle_step(
    model: PollingModel,
    gammas: list | None,
    G: int | None = None,
    beta_first: CoeffTensor | None = None,
    opts: SolveOptions | None = None,
    cache: _SwitchoverCache | None = None,
) -> CycleResult:
    """One full cycle in queue order; ``beta_first`` overrides ``gamma_M * C_M``."""
    opts = opts or SolveOptions()
    cache = cache or _SwitchoverCache(model)
    M = model.M
    if beta_first is None:
        n = gammas[-1].n_max
    else:
        n = beta_first.n_max
    G = G or default_grid_size(n)

    def project(t):
        return project_to_probability(t, opts.tol_im, opts.tol_neg, max(opts.renorm_tol, opts.divergence_tail)).tensor

    tails, norms = [], []
    if beta_first is None:
        beta, tail = apply_switchover(gammas[-1], model, M - 1, G, cache)
        tails.append(tail)
        beta = project(beta)
    else:
        beta = beta_first
    betas, new_gammas = [], []
    for i in range(M):
        betas.append(beta.with_epoch(f"q{i + 1}:begin"))
        res = apply_visit(model, i, beta, G, k_path=opts.k_path)
        tails.append(res.tail)
        norms.append(res.norm_error)
        gamma = project(res.gamma)
        new_gammas.append(gamma)
        if i + 1 < M:
            beta, tail = apply_switchover(gamma, model, i, G, cache)
            tails.append(tail)
            beta = project(beta)
    return CycleResult(betas, new_gammas, max(tails), max(norms))


def _sup_residual(new, old, G):
    if old is None:
        return np.inf
    return max(float(np.max(np.abs(tensor_to_grid(CoeffTensor(a.coeffs - b.coeffs), G)))) for a, b in zip(new, old))


def _linear_growth(totals, opts) -> bool:
    w = opts.drift_window
    if w <= 0 or len(totals) < 2 * w + 1:
        return False
    now = totals[-1] - totals[-2]
    then = totals[-w - 1] - totals[-w - 2]
    return now > opts.drift_min and then > 0 and now >= opts.drift_ratio * then


def solve_stationary(model: PollingModel, opts: SolveOptions | None = None) -> StationarySolution:
    """Iterate cycles from an empty system until successive visit-end PGFs agree."""
    opts = opts or SolveOptions()
    report = validate_model(model)
    if not report.ok:
        raise ValueError("invalid model: " + "; ".join(report.violations))
    M = model.M
    n = opts.resolved_n_max(M)
    cap = opts.n_max_cap or 4 * n
    G = opts.grid if opts.grid and opts.grid >= n + 1 else default_grid_size(n)
    cache = _SwitchoverCache(model)

    gammas = None
    trace = []
    totals = []
    last = None
    cycle = 0
    while cycle < opts.max_cycles:
        first = point_mass(M, n) if gammas is None else None
        res = cycle_step(model, gammas, G, beta_first=first, opts=opts, cache=cache)
        partial = ConvergenceReport(False, cycle, trace[-1] if trace else np.inf, list(trace), res.tail, res.norm_error, n, G)
        if res.norm_error > opts.mass_drift:
            raise DivergenceDetected(f"kernel mass drift {res.norm_error:.2e}", trace, partial)
        if res.tail > opts.divergence_tail:
            raise DivergenceDetected(f"tail mass {res.tail:.2e} beyond n_max={n}", trace, partial)
        if res.tail > opts.tail_tol:
            if n < cap:
                n = min(2 * n, cap)
                G = default_grid_size(n) if not opts.grid or opts.grid < n + 1 else opts.grid
                log.info("tail %.2e > %.1e: growing n_max to %d (grid %d)", res.tail, opts.tail_tol, n, G)
                gammas = None if gammas is None else [resize(g, n) for g in gammas]
                continue
            if res.tail > opts.renorm_tol:
                raise DivergenceDetected(f"tail mass {res.tail:.2e} at the n_max cap {n}", trace, partial)
        cycle += 1
        prev = None if gammas is None else [resize(g, n) for g in gammas]
        resid = _sup_residual(res.gammas, prev, G)
        gammas = res.gammas
        last = res
        if np.isfinite(resid):
            trace.append(resid)
        totals.append(sum(mean(res.gammas[-1], m) for m in range(M)))
        if _linear_growth(totals, opts):
            rep = ConvergenceReport(False, cycle, resid, trace, res.tail, res.norm_error, n, G)
            raise DivergenceDetected(
                f"mean queue length keeps growing by {totals[-1] - totals[-2]:.3e} per cycle", trace, rep
            )
        log.debug("cycle %d residual %.3e tail %.2e", cycle, resid, res.tail)
        if resid <= opts.tol:
            rep = ConvergenceReport(True, cycle, resid, trace, res.tail, res.norm_error, n, G)
            rep.means = epoch_means(res.betas, res.gammas)
            return StationarySolution(res.betas, res.gammas, rep)

    rep = ConvergenceReport(False, cycle, trace[-1] if trace else np.inf, trace, last.tail if last else 0.0, last.norm_error if last else 0.0, n, G)
    raise MaxCyclesExceeded(f"no convergence after {opts.max_cycles} cycles (residual {rep.residual:.2e})", trace, rep)
