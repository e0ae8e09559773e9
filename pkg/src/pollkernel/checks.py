"""Verification battery shared by ``pollkernel verify`` and the test suite.

Every check returns a :class:`CheckResult` carrying the worst error seen and
the tolerance it was judged against.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .amc import dense_visit_matrix, oracle_conditional_pgf, sm_corrected_entry, toeplitz_inverse_entry
from .kernels import NO_TIMER, apply_visit, gamma_at, quad_roots
from .lattice import c_bruteforce, c_closed_form, c_recurrence
from .model import (
    Autonomous,
    Deterministic,
    Exhaustive,
    KLimited,
    PollingModel,
    QueueSpec,
    TimeLimited,
)
from .pgf import CoeffTensor

DEFAULT_TOLERANCES = {
    "toeplitz": 1e-10,
    "lattice": 0.0,
    "kernel_amc": 1e-5,
    "dual_k2": 1e-9,
    "exhaustive_mass": 1e-9,
    "exhaustive_root": 1e-12,
    "normalization": 1e-9,
}
ALL_CHECKS = ("toeplitz", "lattice", "kernel_amc", "dual_k2", "exhaustive", "normalization")


@dataclass
class CheckResult:
    name: str
    max_error: float
    tol: float
    passed: bool
    seconds: float = 0.0
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _result(name, err, tol, t0, detail=""):
    return CheckResult(name, float(err), float(tol), bool(err <= tol), time.perf_counter() - t0, detail)


def random_torus(rng, P: int, M: int) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random((P, M)))


def random_beta(rng, M: int, n_max: int, decay: float = 0.5) -> CoeffTensor:
    """Random probability tensor with geometric-ish decay so truncation is mild."""
    idx = np.indices((n_max + 1,) * M).sum(axis=0)
    c = rng.random((n_max + 1,) * M) * decay**idx
    return CoeffTensor(c / c.sum())


def check_toeplitz(tol=None, draws: int = 100, sizes=(2, 5, 10, 25, 50), seed: int = 0) -> CheckResult:
    """Closed-form inverse entries vs dense inverses, normwise relative error."""
    tol = DEFAULT_TOLERANCES["toeplitz"] if tol is None else tol
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst = 0.0
    where = ""
    for d in range(draws):
        L = sizes[d % len(sizes)]
        lam = rng.uniform(0.05, 2.0)
        b = rng.uniform(0.2, 2.0)
        alpha = rng.uniform(0.1, 2.0)
        load = rng.uniform(0, 1.5) * (1 - np.exp(2j * np.pi * rng.random()))
        s = lam + 1.0 / b + alpha + load
        I, J = np.indices((L, L)) + 1
        for first, last in ((False, False), (True, False), (False, True), (True, True)):
            dense = np.linalg.inv(dense_visit_matrix(L, lam, s, b, first, last))
            if not first and not last:
                approx = toeplitz_inverse_entry(I, J, L, lam, s, b)
            else:
                approx = sm_corrected_entry(I, J, L, lam, s, b, first, last)
            err = np.max(np.abs(approx - dense)) / np.max(np.abs(dense))
            if err > worst:
                worst, where = err, f"L={L} first={first} last={last}"
    return _result("toeplitz", worst, tol, t0, where)


def check_lattice(n_max: int = 6, ij_max: int = 12) -> CheckResult:
    t0 = time.perf_counter()
    mism = 0
    for n in range(n_max + 1):
        table = c_recurrence(n, ij_max, ij_max)
        for i in range(1, ij_max + 1):
            for j in range(1, ij_max + 1):
                a = table(i, j)
                if not (a == c_closed_form(n, i, j) == c_bruteforce(n, i, j)):
                    mism += 1
    return _result("lattice", mism, 0, t0, f"{mism} mismatching entries")


def kernel_amc_model(disc) -> PollingModel:
    return PollingModel(
        (QueueSpec(0.5, 1.0, disc), QueueSpec(0.5, 1.0, disc)),
        (Deterministic(0.1), Deterministic(0.1)),
    )


KERNEL_AMC_CASES = (
    ("autonomous", Autonomous(1.0), "auto"),
    ("time_limited", TimeLimited(1.0), "auto"),
    ("1-limited", KLimited(1), "closed"),
    ("2-limited", KLimited(2), "closed"),
    ("3-limited", KLimited(3), "general"),
)


def check_kernel_amc(tol=None, starts=(0, 1, 2, 5), other: int = 1, points: int = 10, seed: int = 1) -> CheckResult:
    """Conditional visit PGFs from the kernels vs the truncated-chain oracle."""
    tol = DEFAULT_TOLERANCES["kernel_amc"] if tol is None else tol
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, where = 0.0, ""
    for name, disc, path in KERNEL_AMC_CASES:
        model = kernel_amc_model(disc)
        for i1 in starts:
            init = (i1, other)
            z = random_torus(rng, points, 2)
            beta = CoeffTensor(np.zeros((max(init) + 1,) * 2))
            beta.coeffs[init] = 1.0
            got = gamma_at(model, 0, beta, z, k_path=path)
            ref = oracle_conditional_pgf(model, 0, init, z, overflow_tol=1e-8).value
            err = float(np.max(np.abs(got - ref)))
            if err > worst:
                worst, where = err, f"{name} start={init}"
    return _result("kernel_amc", worst, tol, t0, where)


def check_dual_k2(tol=None, tensors: int = 10, points: int = 10, n_max: int = 8, seed: int = 2) -> CheckResult:
    """2-limited closed form vs the general k series with k = 2."""
    tol = DEFAULT_TOLERANCES["dual_k2"] if tol is None else tol
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    model = kernel_amc_model(KLimited(2))
    worst = 0.0
    for _ in range(tensors):
        beta = random_beta(rng, 2, n_max)
        z = random_torus(rng, points, 2)
        a = gamma_at(model, 0, beta, z, k_path="closed")
        b = gamma_at(model, 0, beta, z, k_path="general")
        worst = max(worst, float(np.max(np.abs(a - b))))
    return _result("dual_k2", worst, tol, t0)


def _exhaustive_model() -> PollingModel:
    return PollingModel(
        (QueueSpec(0.5, 1.0, Exhaustive()), QueueSpec(0.3, 1.2, Exhaustive())),
        (Deterministic(0.1), Deterministic(0.1)),
    )


def check_exhaustive_mass(tol=None, tensors: int = 5, seed: int = 3) -> CheckResult:
    """Exhaustive visits leave the served queue empty."""
    tol = DEFAULT_TOLERANCES["exhaustive_mass"] if tol is None else tol
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    model = _exhaustive_model()
    worst = 0.0
    for _ in range(tensors):
        beta = random_beta(rng, 2, 16)
        for i in range(2):
            g = apply_visit(model, i, beta).gamma.coeffs
            worst = max(worst, float(np.abs(np.moveaxis(g, i, 0)[1:]).sum()))
    return _result("exhaustive_mass", worst, tol, t0)


def check_exhaustive_root(tol=None) -> CheckResult:
    """With no arrivals elsewhere (z_{-i} = 1) the busy-period root is exactly 1."""
    tol = DEFAULT_TOLERANCES["exhaustive_root"] if tol is None else tol
    t0 = time.perf_counter()
    model = _exhaustive_model()
    worst = 0.0
    for i in range(2):
        q = quad_roots(model, i, np.ones((1, 1)), NO_TIMER)
        worst = max(worst, float(np.max(np.abs(q.r1 - 1.0))))
    return _result("exhaustive_root", worst, tol, t0)


NORMALIZATION_MODELS = {
    "autonomous": Autonomous(1.0),
    "time_limited": TimeLimited(0.7),
    "1-limited": KLimited(1),
    "2-limited": KLimited(2),
    "4-limited": KLimited(4),
    "exhaustive": Exhaustive(),
}


def check_normalization(tol=None, tensors: int = 3, seed: int = 4) -> CheckResult:
    """Every discipline maps a normalised beta to gamma with gamma(1) = 1."""
    tol = DEFAULT_TOLERANCES["normalization"] if tol is None else tol
    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    worst, where = 0.0, ""
    for name, disc in NORMALIZATION_MODELS.items():
        model = PollingModel(
            (QueueSpec(0.4, 1.0, disc), QueueSpec(0.3, 0.8, Exhaustive())),
            (Deterministic(0.2), Deterministic(0.1)),
        )
        for _ in range(tensors):
            beta = random_beta(rng, 2, 12)
            err = apply_visit(model, 0, beta).norm_error
            if err > worst:
                worst, where = err, name
    return _result("normalization", worst, tol, t0, where)


def run_checks(names=ALL_CHECKS, tolerances: dict | None = None) -> list:
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    out = []
    for name in names:
        if name == "toeplitz":
            out.append(check_toeplitz(tol["toeplitz"]))
        elif name == "lattice":
            out.append(check_lattice())
        elif name == "kernel_amc":
            out.append(check_kernel_amc(tol["kernel_amc"]))
        elif name == "dual_k2":
            out.append(check_dual_k2(tol["dual_k2"]))
        elif name == "exhaustive":
            out.append(check_exhaustive_mass(tol["exhaustive_mass"]))
            out.append(check_exhaustive_root(tol["exhaustive_root"]))
        elif name == "normalization":
            out.append(check_normalization(tol["normalization"]))
        else:
            raise ValueError(f"unknown check {name!r}; choose from {', '.join(ALL_CHECKS)}")
    return out
