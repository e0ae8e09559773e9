"""Discrete-event simulation of polling systems and tandems.

Only the served queue needs event-level treatment during a visit: its
length decides when the visit ends.  The other queues only see Poisson
arrivals over the visit duration (plus, in a tandem, departures from the
served queue), so their counts are drawn in one go once the duration is
known.  Sampling is exact, with no time discretisation.

Random numbers come from one stream per queue plus one switch-over stream,
all spawned from a single ``SeedSequence``.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

import numpy as np

from .model import Autonomous, Exhaustive, KLimited, PollingModel, TimeLimited, validate_model
from .pgf import CoeffTensor

_CHUNK = 8192


class _Stream:
    """Buffered exponential and uniform draws from one generator."""

    def __init__(self, seed_seq: np.random.SeedSequence):
        self.rng = np.random.default_rng(seed_seq)
        self._exp: list = []
        self._unif: list = []

    def exp(self) -> float:
        if not self._exp:
            self._exp = self.rng.standard_exponential(_CHUNK).tolist()
        return self._exp.pop()

    def unif(self) -> float:
        if not self._unif:
            self._unif = self.rng.random(_CHUNK).tolist()
        return self._unif.pop()

    def poisson(self, mean: float) -> int:
        return int(self.rng.poisson(mean)) if mean > 0 else 0


@dataclass
class SimEstimate:
    model: PollingModel
    seed: int
    n_cycles: int
    warmup_cycles: int
    begin: np.ndarray  # (n_cycles, M, M) int: [cycle, visited queue, queue]
    end: np.ndarray
    durations: np.ndarray  # (n_cycles, M) visit lengths
    batches: int

    @property
    def M(self) -> int:
        return self.model.M

    @property
    def visit_counts(self) -> list:
        return [self.n_cycles] * self.M

    def samples(self, i: int, epoch: str) -> np.ndarray:
        if epoch not in ("begin", "end"):
            raise ValueError(f"epoch must be 'begin' or 'end', got {epoch!r}")
        return (self.begin if epoch == "begin" else self.end)[:, i, :]

    def counts(self, i: int, epoch: str) -> Counter:
        """Sparse joint count map at the ``epoch`` of visits to queue ``i``."""
        return Counter(map(tuple, self.samples(i, epoch).tolist()))

    def marginal(self, i: int, epoch: str, m: int | None = None) -> np.ndarray:
        """Empirical distribution of ``N_m`` (default ``m = i``)."""
        x = self.samples(i, epoch)[:, i if m is None else m]
        return np.bincount(x) / x.size

    def to_tensor(self, i: int, epoch: str, n_max: int) -> CoeffTensor:
        """Joint frequencies; samples beyond ``n_max`` are dropped, not folded in."""
        c = np.zeros((n_max + 1,) * self.M)
        x = self.samples(i, epoch)
        keep = np.all(x <= n_max, axis=1)
        np.add.at(c, tuple(x[keep].T), 1.0)
        return CoeffTensor(c / x.shape[0], f"q{i + 1}:{epoch}")

    def batch_means(self, values: np.ndarray):
        """Mean and batch-means standard error of a per-cycle series."""
        values = np.asarray(values, dtype=float)
        B = min(self.batches, values.shape[0])
        if B < 2:
            return float(values.mean()), float("nan")
        size = values.shape[0] // B
        bm = values[: B * size].reshape(B, size, *values.shape[1:]).mean(axis=1)
        return values.mean(axis=0), bm.std(axis=0, ddof=1) / np.sqrt(B)

    def means(self) -> dict:
        out = {}
        for i in range(self.M):
            row = {}
            for ep in ("begin", "end"):
                m, se = self.batch_means(self.samples(i, ep))
                row[ep] = np.atleast_1d(m).tolist()
                row[f"{ep}_se"] = np.atleast_1d(se).tolist()
            out[f"q{i + 1}"] = row
        return out


def _visit(disc, n, i, lam_i, mu, nxt, stream):
    """Run one visit on the state list ``n`` in place; returns its duration."""
    timer = isinstance(disc, (Autonomous, TimeLimited))
    stops_empty = not isinstance(disc, Autonomous)
    if stops_empty and n[i] == 0:
        return 0.0
    alpha = disc.alpha if timer else 0.0
    k = disc.k if isinstance(disc, KLimited) else None
    served = 0
    t = 0.0
    exp, unif = stream.exp, stream.unif
    while True:
        rate_s = mu if n[i] > 0 else 0.0
        total = lam_i + rate_s + alpha
        t += exp() / total
        u = unif() * total
        if u < alpha:
            return t
        if u < alpha + rate_s:
            n[i] -= 1
            if nxt is not None:
                n[nxt] += 1
            served += 1
            if stops_empty and n[i] == 0:
                return t
            if k is not None and served == k:
                return t
        else:
            n[i] += 1


def simulate(
    model: PollingModel,
    n_cycles: int,
    seed: int = 0,
    warmup_cycles: int = 1000,
    batches: int = 50,
) -> SimEstimate:
    """Simulate ``warmup_cycles + n_cycles`` server cycles from an empty system.

    Cycle ``c`` starts at the beginning of the visit to queue 1.  Only the
    last ``n_cycles`` cycles are recorded.
    """
    rep = validate_model(model)
    if not rep.ok:
        raise ValueError("invalid model: " + "; ".join(rep.violations))
    if n_cycles < 1:
        raise ValueError("n_cycles must be >= 1")
    if batches < 20:
        raise ValueError("at least 20 batches are needed for batch-means errors")
    M = model.M
    lam = list(model.lambdas)
    mus = [1.0 / b for b in model.mean_services]
    discs = model.disciplines
    nxts = [i + 1 if model.is_tandem and i + 1 < M else None for i in range(M)]
    for d in discs:
        if not isinstance(d, (Autonomous, TimeLimited, KLimited, Exhaustive)):
            raise TypeError(f"unsupported discipline {d!r}")

    children = np.random.SeedSequence(seed).spawn(M + 1)
    streams = [_Stream(s) for s in children[:M]]
    sw_stream = _Stream(children[M])
    sw_rng = sw_stream.rng
    switchovers = model.switchovers

    begin = np.zeros((n_cycles, M, M), dtype=np.int32)
    end = np.zeros((n_cycles, M, M), dtype=np.int32)
    durations = np.zeros((n_cycles, M))
    n = [0] * M
    total = warmup_cycles + n_cycles
    for c in range(total):
        rec = c - warmup_cycles
        for i in range(M):
            if rec >= 0:
                begin[rec, i] = n
            st = streams[i]
            d = _visit(discs[i], n, i, lam[i], mus[i], nxts[i], st)
            if d > 0:
                for m in range(M):
                    if m != i and lam[m] > 0:
                        n[m] += st.poisson(lam[m] * d)
            if rec >= 0:
                end[rec, i] = n
                durations[rec, i] = d
            c_len = switchovers[i].sample(sw_rng)
            if c_len > 0:
                for m in range(M):
                    if lam[m] > 0:
                        n[m] += sw_stream.poisson(lam[m] * c_len)
    return SimEstimate(model, seed, n_cycles, warmup_cycles, begin, end, durations, batches)
