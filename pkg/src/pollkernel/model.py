"""Polling and tandem system description.

A :class:`PollingModel` holds ``M`` exponential-service queues visited
cyclically by one server, the switch-over times between consecutive
visits, and the routing topology.  Queues are indexed from 0 in code and
from 1 in every user-facing output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DomainError

CYCLIC = "cyclic"
TANDEM = "tandem"

# tolerance on |z_m| <= 1 checks
POLYDISC_TOL = 1e-12


# --------------------------------------------------------------------------
# disciplines


@dataclass(frozen=True)
class Autonomous:
    """Server stays an Exp(alpha) time, even if the queue empties."""

    alpha: float
    name = "autonomous"


@dataclass(frozen=True)
class TimeLimited:
    """Server leaves after an Exp(alpha) time or when the queue empties."""

    alpha: float
    name = "time_limited"


@dataclass(frozen=True)
class KLimited:
    """Server leaves after ``k`` service completions or when the queue empties."""

    k: int
    name = "k_limited"


@dataclass(frozen=True)
class Exhaustive:
    name = "exhaustive"


Discipline = Union[Autonomous, TimeLimited, KLimited, Exhaustive]


def has_timer(disc: Discipline) -> bool:
    return isinstance(disc, (Autonomous, TimeLimited))


# --------------------------------------------------------------------------
# switch-over distributions


@dataclass(frozen=True)
class Zero:
    name = "zero"

    @property
    def mean(self) -> float:
        return 0.0

    def lst(self, s):
        return np.ones_like(np.asarray(s, dtype=complex))

    def sample(self, rng) -> float:
        return 0.0


@dataclass(frozen=True)
class Deterministic:
    c: float
    name = "deterministic"

    @property
    def mean(self) -> float:
        return self.c

    def lst(self, s):
        return np.exp(-self.c * np.asarray(s, dtype=complex))

    def sample(self, rng) -> float:
        return self.c


@dataclass(frozen=True)
class Exponential:
    mean: float
    name = "exponential"

    def lst(self, s):
        return 1.0 / (1.0 + self.mean * np.asarray(s, dtype=complex))

    def sample(self, rng) -> float:
        return rng.exponential(self.mean) if self.mean > 0 else 0.0


@dataclass(frozen=True)
class CustomSwitchover:
    """Any distribution given through its Laplace-Stieltjes transform.

    ``sampler`` is optional and only needed by the simulator.
    """

    lst_fn: Callable
    mean: float
    sampler: Callable | None = None
    name = "custom"

    def lst(self, s):
        return np.asarray(self.lst_fn(np.asarray(s, dtype=complex)), dtype=complex)

    def sample(self, rng) -> float:
        if self.sampler is None:
            raise ValueError("custom switch-over has no sampler")
        return float(self.sampler(rng))


SwitchoverDist = Union[Zero, Deterministic, Exponential, CustomSwitchover]


# --------------------------------------------------------------------------
# model


@dataclass(frozen=True)
class QueueSpec:
    lam: float
    mean_service: float
    discipline: Discipline


@dataclass(frozen=True)
class PollingModel:
    queues: tuple
    switchovers: tuple
    routing: str = CYCLIC

    def __post_init__(self):
        object.__setattr__(self, "queues", tuple(self.queues))
        object.__setattr__(self, "switchovers", tuple(self.switchovers))

    @property
    def M(self) -> int:
        return len(self.queues)

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([q.lam for q in self.queues], dtype=float)

    @property
    def mean_services(self) -> np.ndarray:
        return np.array([q.mean_service for q in self.queues], dtype=float)

    @property
    def disciplines(self) -> tuple:
        return tuple(q.discipline for q in self.queues)

    @property
    def is_tandem(self) -> bool:
        return self.routing == TANDEM

    def relabel(self, order: Sequence[int]) -> "PollingModel":
        """Model with queues (and the switch-over after each) permuted."""
        return PollingModel(
            tuple(self.queues[k] for k in order),
            tuple(self.switchovers[k] for k in order),
            self.routing,
        )


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_model(model: PollingModel) -> ValidationReport:
    """Check the model invariants; never raises."""
    report = ValidationReport()
    bad = report.violations
    if model.M < 1:
        bad.append("M must be a positive integer")
        return report
    if len(model.switchovers) != model.M:
        bad.append(f"need {model.M} switch-overs, got {len(model.switchovers)}")
    if model.routing not in (CYCLIC, TANDEM):
        bad.append(f"unknown routing {model.routing!r}")

    for idx, q in enumerate(model.queues, start=1):
        if not q.mean_service > 0:
            bad.append(f"queue {idx}: mean service time must be > 0")
        if not q.lam >= 0:
            bad.append(f"queue {idx}: arrival rate must be >= 0")
        d = q.discipline
        if has_timer(d) and not d.alpha > 0:
            bad.append(f"queue {idx}: timer rate alpha must be > 0")
        if isinstance(d, KLimited) and (int(d.k) != d.k or d.k < 1):
            bad.append(f"queue {idx}: k must be an integer >= 1")

    for idx, so in enumerate(model.switchovers, start=1):
        if isinstance(so, Deterministic) and not so.c >= 0:
            bad.append(f"switch-over {idx}: c must be >= 0")
        if not so.mean >= 0:
            bad.append(f"switch-over {idx}: mean must be >= 0")
    if model.switchovers and not any(so.mean > 0 for so in model.switchovers):
        bad.append("at least one c^i>0 is required (some switch-over mean must be positive)")

    if model.routing == TANDEM:
        lam = model.lambdas
        if not lam[0] > 0 or np.any(lam[1:] != 0):
            bad.append("tandem routing: only queue 1 may have exogenous arrivals (lambda_1 > 0, lambda_i = 0 for i > 1)")
        for idx, d in enumerate(model.disciplines, start=1):
            if not has_timer(d):
                bad.append(f"queue {idx}: tandem routing supports autonomous and time-limited disciplines only")
    return report


def arrival_load(lambdas, z, skip: int | None = None):
    """sum_m lambda_m (1 - z_m) over the last axis of ``z``, optionally skipping one queue."""
    lam = np.asarray(lambdas, dtype=float)
    z = np.asarray(z, dtype=complex)
    terms = lam * (1.0 - z)
    if skip is not None:
        terms = np.delete(terms, skip, axis=-1)
    return terms.sum(axis=-1)


def switchover_arrival_pgf(dist: SwitchoverDist, lambdas, z):
    """Joint PGF of the Poisson arrivals to every queue during one switch-over.

    ``z`` has shape ``(..., M)``; the result has shape ``(...)``.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(z) > 1 + POLYDISC_TOL):
        raise DomainError("switch-over PGF evaluated outside the unit polydisc")
    return dist.lst(arrival_load(lambdas, z))


# --------------------------------------------------------------------------
# (de)serialisation used by the CLI config


_DISC_TYPES = {
    "autonomous": lambda d: Autonomous(float(d["alpha"])),
    "time_limited": lambda d: TimeLimited(float(d["alpha"])),
    "k_limited": lambda d: KLimited(int(d["k"])),
    "exhaustive": lambda d: Exhaustive(),
}
_DISC_KEYS = {"autonomous": {"alpha"}, "time_limited": {"alpha"}, "k_limited": {"k"}, "exhaustive": set()}

_SO_TYPES = {
    "zero": lambda d: Zero(),
    "deterministic": lambda d: Deterministic(float(d["c"])),
    "exponential": lambda d: Exponential(float(d["mean"])),
}
_SO_KEYS = {"zero": set(), "deterministic": {"c"}, "exponential": {"mean"}}


def _check_keys(obj: dict, allowed: set, where: str):
    extra = set(obj) - allowed
    if extra:
        raise ValueError(f"{where}: unknown keys {sorted(extra)}")


def discipline_from_dict(d: dict) -> Discipline:
    kind = d.get("type")
    if kind not in _DISC_TYPES:
        raise ValueError(f"unknown discipline type {kind!r}")
    _check_keys(d, _DISC_KEYS[kind] | {"type"}, f"discipline {kind}")
    return _DISC_TYPES[kind](d)


def switchover_from_dict(d: dict) -> SwitchoverDist:
    kind = d.get("type")
    if kind not in _SO_TYPES:
        raise ValueError(f"unknown switch-over type {kind!r}")
    _check_keys(d, _SO_KEYS[kind] | {"type"}, f"switch-over {kind}")
    return _SO_TYPES[kind](d)


def model_from_dict(d: dict) -> PollingModel:
    _check_keys(d, {"routing", "queues", "switchovers"}, "model")
    queues = []
    for q in d["queues"]:
        _check_keys(q, {"lambda", "mean_service", "discipline"}, "queue")
        queues.append(QueueSpec(float(q["lambda"]), float(q["mean_service"]), discipline_from_dict(q["discipline"])))
    switchovers = [switchover_from_dict(s) for s in d["switchovers"]]
    return PollingModel(tuple(queues), tuple(switchovers), d.get("routing", CYCLIC))


def discipline_to_dict(disc: Discipline) -> dict:
    out = {"type": disc.name}
    if has_timer(disc):
        out["alpha"] = disc.alpha
    elif isinstance(disc, KLimited):
        out["k"] = disc.k
    return out


def model_to_dict(model: PollingModel) -> dict:
    sos = []
    for so in model.switchovers:
        if isinstance(so, Deterministic):
            sos.append({"type": "deterministic", "c": so.c})
        elif isinstance(so, Exponential):
            sos.append({"type": "exponential", "mean": so.mean})
        elif isinstance(so, Zero):
            sos.append({"type": "zero"})
        else:
            raise ValueError("custom switch-overs cannot be serialised")
    return {
        "routing": model.routing,
        "queues": [
            {"lambda": q.lam, "mean_service": q.mean_service, "discipline": discipline_to_dict(q.discipline)}
            for q in model.queues
        ],
        "switchovers": sos,
    }


def symmetric_model(M: int, lam: float, b: float, discipline: Discipline, switchover: SwitchoverDist) -> PollingModel:
    return PollingModel(tuple(QueueSpec(lam, b, discipline) for _ in range(M)), tuple(switchover for _ in range(M)))
