"""Solve the reference models and compare them with long simulations.

    python3 scripts/run_reference_models.py --cycles 1000000

Prints visit-end means (analytic vs simulated, with z-scores) and the worst
total-variation distance between the analytic and empirical marginals.
"""

import argparse
import json
import time
from pathlib import Path

from pollkernel.cli import compare_results
from pollkernel.errors import IterationError
from pollkernel.iterate import SolveOptions, solve_stationary
from pollkernel.model import model_from_dict
from pollkernel.sim import simulate

CONFIGS = Path(__file__).parent / "configs"
MODELS = ["symmetric_time_limited", "exhaustive_one_limited", "tandem_autonomous", "tandem_autonomous_light"]


def run(name, cycles, seed):
    cfg = json.loads((CONFIGS / f"{name}.json").read_text())
    model = model_from_dict(cfg["model"])
    t0 = time.perf_counter()
    print(f"\n== {name}")
    try:
        sol = solve_stationary(model, SolveOptions(**cfg.get("solver", {})))
    except IterationError as exc:
        print(f"solver: {type(exc).__name__}: {exc}")
        est = simulate(model, cycles, seed=seed)
        first, last = est.end[0, 0], est.end[-1, 0]
        print(f"simulation: queue lengths at the end of visit 1 went from {first.tolist()} to {last.tolist()}")
        return
    t_solve = time.perf_counter() - t0
    est = simulate(model, cycles, seed=seed)
    t_sim = time.perf_counter() - t0 - t_solve
    rep = compare_results(sol, est)
    print(f"solver: {sol.report.cycles} cycles, n_max={sol.report.n_max}, residual {sol.report.residual:.1e} ({t_solve:.1f}s)")
    print(f"simulation: {cycles} cycles ({t_sim:.1f}s)")
    for r in rep["rows"]:
        if r["epoch"] == "end":
            print(f"  visit {r['visit']} end, E[N{r['queue']}]: {r['analytic']:.6f} vs {r['simulated']:.6f} +- {r['se']:.6f}  z={float(r['z']):.2f}")
    print(f"  worst TV over all marginals: {max(r['tv'] for r in rep['rows']):.4f}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--cycles", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--models", nargs="*", default=MODELS, choices=MODELS)
    args = ap.parse_args()
    for name in args.models:
        run(name, args.cycles, args.seed)


if __name__ == "__main__":
    main()
