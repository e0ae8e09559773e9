"""Residual traces of the cycle iteration and the spectral rate behind them.

    python3 scripts/convergence_trace.py

For each stable reference model this prints the sup-norm residual every ten
cycles, the worst ten-cycle reduction factor after cycle 10, and the modulus
of the second eigenvalue of the one-cycle transition operator on a small
truncation.  The iteration is a power method on that operator, so its
asymptotic per-cycle contraction cannot beat that eigenvalue.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from pollkernel.iterate import SolveOptions, apply_switchover, solve_stationary
from pollkernel.kernels import apply_visit
from pollkernel.model import model_from_dict
from pollkernel.pgf import default_grid_size, point_mass

CONFIGS = Path(__file__).parent / "configs"
MODELS = ["symmetric_time_limited", "exhaustive_one_limited", "tandem_autonomous_light"]


def cycle_operator(model, n):
    """Dense one-cycle transition matrix on the box {0..n}^M (mass beyond n is lost)."""
    M = model.M
    G = default_grid_size(n)
    size = (n + 1) ** M
    P = np.zeros((size, size))
    for s in range(size):
        t = point_mass(M, n, np.unravel_index(s, (n + 1,) * M))
        for i in range(M):
            t = apply_visit(model, i, t, G).gamma
            t, _ = apply_switchover(t, model, i, G)
        P[s] = np.real(t.coeffs).ravel()
    return P


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--box", type=int, default=40, help="truncation used for the eigenvalue estimate")
    ap.add_argument("--models", nargs="*", default=MODELS, choices=MODELS)
    args = ap.parse_args()
    for name in args.models:
        cfg = json.loads((CONFIGS / f"{name}.json").read_text())
        model = model_from_dict(cfg["model"])
        sol = solve_stationary(model, SolveOptions(**cfg.get("solver", {})))
        trace = sol.report.residual_trace
        print(f"\n== {name}: converged after {sol.report.cycles} cycles")
        for k in range(0, len(trace), 10):
            print(f"  cycle {k + 2:4d}  residual {trace[k]:.3e}")
        res = {k + 2: r for k, r in enumerate(trace)}
        factors = [res[c] / res[c + 10] for c in range(10, max(res) - 9)]
        print(f"  worst 10-cycle reduction after cycle 10: {min(factors):.3f}")
        print(f"  late per-cycle ratio: {trace[-1] / trace[-2]:.4f}")
        ev = np.sort(np.abs(np.linalg.eigvals(cycle_operator(model, args.box))))[::-1]
        print(f"  |eigenvalues| of the one-cycle operator (box {args.box}): {np.round(ev[:4], 4).tolist()}")
        print(f"  implied 10-cycle factor: {ev[1] ** -10:.3f}")


if __name__ == "__main__":
    main()
