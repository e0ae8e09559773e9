import numpy as np
import pytest
from conftest import exhaustive_one_limited, tandem_autonomous

from pollkernel.model import Autonomous, Deterministic, Exhaustive, Exponential, KLimited, PollingModel, QueueSpec, TimeLimited
from pollkernel.sim import simulate


def test_no_arrivals_gives_zero_samples():
    m = PollingModel((QueueSpec(0.0, 1.0, Autonomous(1.0)),) * 2, (Deterministic(0.3),) * 2)
    est = simulate(m, 500, seed=1, warmup_cycles=10)
    assert not est.begin.any() and not est.end.any()


def test_exhaustive_end_samples_are_empty():
    est = simulate(exhaustive_one_limited(), 5000, seed=2)
    assert np.all(est.samples(0, "end")[:, 0] == 0)


def test_symmetric_autonomous_means_agree():
    q = QueueSpec(0.3, 1.0, Autonomous(1.0))
    est = simulate(PollingModel((q, q), (Deterministic(0.2),) * 2), 40_000, seed=3)
    mu = est.means()
    a, sa = mu["q1"]["end"][0], mu["q1"]["end_se"][0]
    b, sb = mu["q2"]["end"][1], mu["q2"]["end_se"][1]
    assert abs(a - b) <= 3 * np.hypot(sa, sb)


def test_deterministic_per_seed():
    m = exhaustive_one_limited()
    a = simulate(m, 2000, seed=7)
    b = simulate(m, 2000, seed=7)
    c = simulate(m, 2000, seed=8)
    assert np.array_equal(a.end, b.end) and np.array_equal(a.durations, b.durations)
    assert not np.array_equal(a.end, c.end)


def test_different_seeds_agree_statistically():
    m = exhaustive_one_limited()
    a = simulate(m, 20_000, seed=11).means()
    b = simulate(m, 20_000, seed=12).means()
    for key in ("q1", "q2"):
        for x, y, sx, sy in zip(a[key]["begin"], b[key]["begin"], a[key]["begin_se"], b[key]["begin_se"]):
            assert abs(x - y) <= 4 * np.hypot(sx, sy)


def test_autonomous_visit_durations_are_exponential():
    m = PollingModel((QueueSpec(0.4, 1.0, Autonomous(2.0)), QueueSpec(0.2, 1.0, Exhaustive())), (Deterministic(0.2),) * 2)
    est = simulate(m, 20_000, seed=4)
    mean, se = est.batch_means(est.durations[:, 0])
    assert abs(mean - 0.5) <= 3 * se


def test_k_limited_serves_at_most_k():
    k = 2
    m = PollingModel((QueueSpec(0.6, 1.0, KLimited(k)), QueueSpec(0.1, 1.0, Exhaustive())), (Exponential(0.5),) * 2)
    est = simulate(m, 10_000, seed=5)
    # N_1 drops by at most k during the visit (arrivals only increase it)
    drop = est.begin[:, 0, 0] - est.end[:, 0, 0]
    assert drop.max() <= k
    # a visit that served fewer than k emptied the queue
    short = drop < k
    assert np.all((est.end[short, 0, 0] == 0) | (drop[short] < 0) | (est.durations[short, 0] > 0))


def test_time_limited_empty_visit_has_zero_length():
    m = PollingModel((QueueSpec(0.1, 1.0, TimeLimited(1.0)), QueueSpec(0.1, 1.0, Exhaustive())), (Deterministic(0.1),) * 2)
    est = simulate(m, 5000, seed=6)
    empty = est.begin[:, 0, 0] == 0
    assert np.all(est.durations[empty, 0] == 0)


def test_tandem_departures_feed_next_queue():
    est = simulate(tandem_autonomous(0.25), 5000, seed=9)
    # nobody arrives at queue 2 from outside, so it grows only during queue 1 visits
    grow_at_q2_visit = est.end[:, 1, 1] > est.begin[:, 1, 1]
    assert not grow_at_q2_visit.any()
    assert (est.end[:, 0, 1] > est.begin[:, 0, 1]).any()


def test_counts_are_consistent():
    est = simulate(exhaustive_one_limited(), 3000, seed=10)
    for i in range(2):
        for ep in ("begin", "end"):
            assert sum(est.counts(i, ep).values()) == est.n_cycles
            assert est.marginal(i, ep).sum() == pytest.approx(1.0)
            t = est.to_tensor(i, ep, 60)
            assert t.total_mass() == pytest.approx(1.0)


def test_argument_validation():
    m = exhaustive_one_limited()
    with pytest.raises(ValueError):
        simulate(m, 0)
    with pytest.raises(ValueError):
        simulate(m, 100, batches=5)
