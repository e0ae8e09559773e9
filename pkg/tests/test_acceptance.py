"""Acceptance suite: one recorded PASS/FAIL line per criterion.

Lines are printed at the end of the pytest run by ``conftest.py``.
"""

import json
import time

import numpy as np
import pytest
from conftest import exhaustive_one_limited, symmetric_time_limited, tandem_autonomous

from pollkernel.checks import (
    check_dual_k2,
    check_exhaustive_mass,
    check_exhaustive_root,
    check_kernel_amc,
    check_lattice,
    check_normalization,
    check_toeplitz,
)
from pollkernel.cli import main
from pollkernel.errors import IterationError
from pollkernel.iterate import solve_stationary
from pollkernel.model import model_to_dict
from pollkernel.pgf import marginal, total_variation
from pollkernel.sim import simulate

SIM_CYCLES = 1_000_000
Z_MAX = 3.0
TV_MAX = 0.01


def test_1_structured_matrix_fidelity(record_acceptance):
    res = check_toeplitz(tol=1e-10, draws=100, sizes=(2, 5, 10, 25, 50))
    ok = res.passed and res.seconds < 10
    record_acceptance("1", ok, f"max normwise rel. error {res.max_error:.2e} (tol 1e-10), {res.seconds:.1f}s (limit 10s)")
    assert ok


def test_2_lattice_triple_agreement(record_acceptance):
    res = check_lattice(n_max=6, ij_max=12)
    ok = res.passed and res.seconds < 5
    record_acceptance("2", ok, f"{int(res.max_error)} mismatches over n<=6, i,j<=12, {res.seconds:.1f}s (limit 5s)")
    assert ok


def test_3_kernel_vs_amc(record_acceptance):
    res = check_kernel_amc(tol=1e-5, starts=(0, 1, 2, 5), points=10)
    ok = res.passed and res.seconds < 120
    record_acceptance("3", ok, f"max |kernel - oracle| {res.max_error:.2e} (tol 1e-5) at {res.detail}, {res.seconds:.1f}s")
    assert ok


def test_4_normalization(record_acceptance):
    res = check_normalization(tol=1e-9)
    record_acceptance("4", res.passed, f"sweep worst {res.max_error:.2e} (tol 1e-9)")
    assert res.passed


def test_5_exhaustive_structure(record_acceptance):
    mass = check_exhaustive_mass(tol=1e-9)
    root = check_exhaustive_root(tol=1e-12)
    ok = mass.passed and root.passed
    record_acceptance("5", ok, f"served-axis mass {mass.max_error:.2e} (tol 1e-9), |y1 - 1| {root.max_error:.2e} (tol 1e-12)")
    assert ok


def test_6_dual_path_k2(record_acceptance):
    res = check_dual_k2(tol=1e-9, tensors=10, points=10)
    record_acceptance("6", res.passed, f"max |closed - general| {res.max_error:.2e} (tol 1e-9)")
    assert res.passed


# --------------------------------------------------------------------------
# criterion 7 and 8: reference models

REFERENCE = {
    "7a": symmetric_time_limited,
    "7b": exhaustive_one_limited,
    "7c": tandem_autonomous,
}
_solutions: dict = {}


def _solve(key):
    if key not in _solutions:
        try:
            _solutions[key] = solve_stationary(REFERENCE[key]())
        except IterationError as exc:
            _solutions[key] = exc
    return _solutions[key]


def compare_to_simulation(sol, est):
    """Worst |z| of visit-end means and worst TV over all marginals."""
    sim = est.means()
    ana = sol.means()
    zmax, tvmax = 0.0, 0.0
    M = est.M
    for i in range(M):
        key = f"q{i + 1}"
        for m in range(M):
            diff = abs(ana[key]["end"][m] - sim[key]["end"][m])
            se = sim[key]["end_se"][m]
            zmax = max(zmax, 0.0 if diff == 0 else diff / se)
            for ep, tensors in (("begin", sol.begin), ("end", sol.end)):
                tvmax = max(tvmax, total_variation(marginal(tensors[i], m), est.marginal(i, ep, m)))
    return zmax, tvmax


@pytest.mark.slow
@pytest.mark.parametrize("key", ["7a", "7b", "7c"])
def test_7_fixed_point_vs_simulation(key, record_acceptance):
    t0 = time.perf_counter()
    sol = _solve(key)
    if isinstance(sol, IterationError):
        est = simulate(REFERENCE[key](), SIM_CYCLES, seed=2024, warmup_cycles=1000)
        growth = est.end[-1, 0].sum() - est.end[0, 0].sum()
        record_acceptance(
            key,
            False,
            f"solver: {type(sol).__name__}: {sol}; simulated queue lengths grow by {growth} over {SIM_CYCLES} cycles (no stationary regime)",
        )
        pytest.fail(f"no stationary solution: {sol}")
    est = simulate(REFERENCE[key](), SIM_CYCLES, seed=2024, warmup_cycles=1000)
    zmax, tvmax = compare_to_simulation(sol, est)
    ok = zmax <= Z_MAX and tvmax <= TV_MAX
    record_acceptance(
        key, ok, f"max |z| {zmax:.2f} (limit 3), max TV {tvmax:.4f} (limit 0.01), {time.perf_counter() - t0:.0f}s"
    )
    assert ok


@pytest.mark.slow
def test_7_supplement_stable_tandem():
    """The tandem kernels at a load the tandem can carry (not an acceptance criterion)."""
    sol = solve_stationary(tandem_autonomous(0.25))
    est = simulate(tandem_autonomous(0.25), 200_000, seed=77, warmup_cycles=1000)
    zmax, tvmax = compare_to_simulation(sol, est)
    assert zmax <= 4 and tvmax <= TV_MAX


def window_factors(trace, first_cycle=10, window=10):
    """``r(c) / r(c + window)`` for every cycle ``c >= first_cycle`` in the trace.

    ``trace[k]`` is the residual after cycle ``k + 2`` (cycle 1 has no predecessor).
    """
    res = {k + 2: r for k, r in enumerate(trace)}
    last = max(res)
    return [res[c] / res[c + window] for c in range(first_cycle, last - window + 1)]


def test_8_convergence_behavior(record_acceptance):
    details, ok = [], True
    for key in ("7a", "7b"):
        sol = _solve(key)
        assert not isinstance(sol, IterationError)
        f = window_factors(sol.report.residual_trace)
        worst = min(f)
        ok &= worst >= 2.0
        details.append(f"{key}: worst 10-cycle factor {worst:.2f} over {sol.report.cycles} cycles")
    record_acceptance("8", ok, "; ".join(details) + " (limit >= 2; 7c has no stationary regime)")
    assert ok


def test_9_simulate_determinism(tmp_path, record_acceptance):
    cfg = {
        "model": model_to_dict(exhaustive_one_limited()),
        "sim": {"n_cycles": 50_000, "seed": 31337, "warmup_cycles": 500},
    }
    outputs = []
    for run in ("first", "second"):
        cfg["output"] = {"directory": str(tmp_path / run)}
        path = tmp_path / f"{run}.json"
        path.write_text(json.dumps(cfg))
        assert main(["simulate", str(path)]) == 0
        outputs.append({p.name: p.read_bytes() for p in sorted((tmp_path / run).glob("*.csv"))})
    ok = outputs[0] == outputs[1] and len(outputs[0]) == 4
    record_acceptance("9", ok, f"{len(outputs[0])} CSV files byte-identical across two runs")
    assert ok


def test_window_factors_indexing():
    trace = [2.0**-k for k in range(30)]  # halves every cycle
    assert np.allclose(window_factors(trace), 2.0**10)
