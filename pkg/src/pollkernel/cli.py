"""Command line front end: ``pollkernel {analyze,simulate,verify,compare} CONFIG``.

All model and solver parameters come from the JSON config; flags only pick
the command and verbosity.  Exit codes: 0 success, 1 usage/config/IO error,
2 divergence or non-convergence, 3 verification failure.
"""

from __future__ import annotations

import os

_threads = os.environ.get("POLLKERNEL_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse  # noqa: E402
import json  # noqa: E402
import logging  # noqa: E402
import sys  # noqa: E402
import tempfile  # noqa: E402
from dataclasses import dataclass, field, fields  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from .checks import ALL_CHECKS, DEFAULT_TOLERANCES, run_checks  # noqa: E402
from .errors import IterationError, PollingError  # noqa: E402
from .iterate import SolveOptions, solve_stationary  # noqa: E402
from .model import PollingModel, model_from_dict, validate_model  # noqa: E402
from .pgf import marginal, marginal_csv, total_variation  # noqa: E402
from .sim import simulate  # noqa: E402

log = logging.getLogger("pollkernel")

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_VERIFY = 0, 1, 2, 3


class ConfigError(Exception):
    pass


@dataclass
class SimConfig:
    n_cycles: int = 100_000
    seed: int = 0
    warmup_cycles: int = 1000
    batches: int = 50
    model: dict | None = None  # optional override, same disciplines required


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: tuple = ("csv", "json")


@dataclass
class VerifyConfig:
    checks: tuple = ALL_CHECKS
    tolerances: dict = field(default_factory=dict)
    z_max: float = 3.0
    tv_max: float = 0.01


@dataclass
class RunConfig:
    model: PollingModel
    solver: SolveOptions
    sim: SimConfig
    output: OutputConfig
    verify: VerifyConfig


def _build(cls, block, where):
    if block is None:
        return cls()
    if not isinstance(block, dict):
        raise ConfigError(f"{where}: expected an object")
    allowed = {f.name for f in fields(cls)}
    extra = set(block) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    try:
        return cls(**block)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(raw) - {"model", "solver", "sim", "output", "verify"}
    if extra:
        raise ConfigError(f"config: unknown keys {sorted(extra)}")
    model = None
    if "model" in raw:
        try:
            model = model_from_dict(raw["model"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from exc
        rep = validate_model(model)
        if not rep.ok:
            raise ConfigError("model: " + "; ".join(rep.violations))
    output = _build(OutputConfig, raw.get("output"), "output")
    output.formats = tuple(output.formats)
    bad = set(output.formats) - {"csv", "json"}
    if bad:
        raise ConfigError(f"output.formats: unsupported {sorted(bad)}")
    verify = _build(VerifyConfig, raw.get("verify"), "verify")
    verify.checks = tuple(verify.checks)
    unknown = set(verify.checks) - set(ALL_CHECKS)
    if unknown:
        raise ConfigError(f"verify.checks: unknown {sorted(unknown)}")
    unknown = set(verify.tolerances) - set(DEFAULT_TOLERANCES)
    if unknown:
        raise ConfigError(f"verify.tolerances: unknown {sorted(unknown)}")
    return RunConfig(model, _build(SolveOptions, raw.get("solver"), "solver"), _build(SimConfig, raw.get("sim"), "sim"), output, verify)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(raw)


def _require_model(cfg: RunConfig) -> PollingModel:
    if cfg.model is None:
        raise ConfigError("config has no model block")
    return cfg.model


# --------------------------------------------------------------------------
# output


def write_atomic(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not serialisable: {type(x).__name__}")


def _finite(x):
    """JSON has no inf; report it as a string."""
    return x if np.isfinite(x) else str(x)


def _write_marginals(out: Path, marginals: dict, cfg: OutputConfig):
    if "csv" not in cfg.formats:
        return
    for (i, ep), prob in marginals.items():
        write_atomic(out / f"marginal_q{i + 1}_{ep}.csv", marginal_csv(prob))


def _analytic_marginals(sol) -> dict:
    return {(i, ep): marginal((sol.begin if ep == "begin" else sol.end)[i], i) for i in range(len(sol.end)) for ep in ("begin", "end")}


def _sim_marginals(est) -> dict:
    return {(i, ep): est.marginal(i, ep) for i in range(est.M) for ep in ("begin", "end")}


# --------------------------------------------------------------------------
# commands


def cmd_analyze(cfg: RunConfig) -> int:
    model = _require_model(cfg)
    out = Path(cfg.output.directory)
    try:
        sol = solve_stationary(model, cfg.solver)
    except IterationError as exc:
        log.error("%s", exc)
        if "json" in cfg.output.formats:
            rep = exc.report.to_dict() if exc.report is not None else {"residual_trace": exc.trace}
            rep["message"] = str(exc)
            rep["residual"] = _finite(rep.get("residual", float("nan")))
            write_atomic(out / "convergence.json", _json(rep))
        return EXIT_DIVERGED
    _write_marginals(out, _analytic_marginals(sol), cfg.output)
    if "json" in cfg.output.formats:
        write_atomic(out / "means.json", _json(sol.means()))
        write_atomic(out / "convergence.json", _json(sol.report.to_dict()))
    log.info("converged in %d cycles, residual %.2e", sol.report.cycles, sol.report.residual)
    return EXIT_OK


def _run_sim(cfg: RunConfig, model: PollingModel):
    s = cfg.sim
    return simulate(model, s.n_cycles, seed=s.seed, warmup_cycles=s.warmup_cycles, batches=s.batches)


def cmd_simulate(cfg: RunConfig) -> int:
    model = _sim_model(cfg)
    est = _run_sim(cfg, model)
    out = Path(cfg.output.directory)
    _write_marginals(out, _sim_marginals(est), cfg.output)
    if "json" in cfg.output.formats:
        write_atomic(out / "means.json", _json(est.means()))
        meta = {
            "seed": est.seed,
            "n_cycles": est.n_cycles,
            "warmup_cycles": est.warmup_cycles,
            "batches": est.batches,
            "visit_counts": est.visit_counts,
        }
        write_atomic(out / "simulation.json", _json(meta))
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    results = run_checks(cfg.verify.checks, cfg.verify.tolerances)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<16} max_error={r.max_error:.3e} tol={r.tol:.1e} {r.detail}")
    if "json" in cfg.output.formats:
        write_atomic(Path(cfg.output.directory) / "verify.json", _json([r.to_dict() for r in results]))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def _sim_model(cfg: RunConfig) -> PollingModel:
    model = _require_model(cfg)
    if cfg.sim.model is None:
        return model
    try:
        other = model_from_dict(cfg.sim.model)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"sim.model: {exc}") from exc
    if other.M != model.M or other.disciplines != model.disciplines or other.routing != model.routing:
        raise ConfigError("sim.model must use the same queues, routing and disciplines as model")
    rep = validate_model(other)
    if not rep.ok:
        raise ConfigError("sim.model: " + "; ".join(rep.violations))
    return other


def z_score(a: float, b: float, se: float) -> float:
    diff = abs(a - b)
    if diff == 0:
        return 0.0
    return diff / se if se > 0 else float("inf")


def compare_results(sol, est) -> dict:
    """z-scores of analytic vs simulated means and TV distances of marginals."""
    sim_means = est.means()
    rows = []
    for i in range(est.M):
        key = f"q{i + 1}"
        for ep in ("begin", "end"):
            tensor = (sol.begin if ep == "begin" else sol.end)[i]
            for m in range(est.M):
                a = sol.means()[key][ep][m]
                b = sim_means[key][ep][m]
                se = sim_means[key][f"{ep}_se"][m]
                rows.append(
                    {
                        "visit": i + 1,
                        "epoch": ep,
                        "queue": m + 1,
                        "analytic": a,
                        "simulated": b,
                        "se": se,
                        "z": _finite(z_score(a, b, se)),
                        "tv": total_variation(marginal(tensor, m), est.marginal(i, ep, m)),
                    }
                )
    return {"rows": rows}


def cmd_compare(cfg: RunConfig) -> int:
    model = _require_model(cfg)
    sim_model = _sim_model(cfg)
    try:
        sol = solve_stationary(model, cfg.solver)
    except IterationError as exc:
        log.error("%s", exc)
        return EXIT_DIVERGED
    est = _run_sim(cfg, sim_model)
    report = compare_results(sol, est)
    zs = [float(r["z"]) for r in report["rows"]]
    tvs = [r["tv"] for r in report["rows"]]
    report["max_abs_z"] = _finite(max(zs))
    report["max_tv"] = max(tvs)
    ok = max(zs) <= cfg.verify.z_max and max(tvs) <= cfg.verify.tv_max
    report["passed"] = ok
    for r in report["rows"]:
        print(f"visit {r['visit']} {r['epoch']:<5} N{r['queue']}: analytic {r['analytic']:.6f} sim {r['simulated']:.6f} z={float(r['z']):.2f} tv={r['tv']:.4f}")
    if "json" in cfg.output.formats:
        write_atomic(Path(cfg.output.directory) / "compare.json", _json(report))
    return EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {"analyze": cmd_analyze, "simulate": cmd_simulate, "verify": cmd_verify, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pollkernel", description="Visit-epoch queue-length distributions of polling systems.")
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for progress, -vv for per-cycle detail")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__name__.replace("cmd_", ""))
        sp.add_argument("config", help="JSON run configuration")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PollingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
