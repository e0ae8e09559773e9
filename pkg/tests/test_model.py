import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pollkernel.errors import DomainError
from pollkernel.model import (
    TANDEM,
    Autonomous,
    CustomSwitchover,
    Deterministic,
    Exhaustive,
    Exponential,
    KLimited,
    PollingModel,
    QueueSpec,
    TimeLimited,
    Zero,
    model_from_dict,
    model_to_dict,
    switchover_arrival_pgf,
    symmetric_model,
    validate_model,
)


def _tl_model(switchover):
    q = QueueSpec(1.0, 0.4, TimeLimited(2.0))
    return PollingModel((q, q), (switchover, switchover))


def test_valid_time_limited_model_passes():
    assert validate_model(_tl_model(Deterministic(0.1))).ok


def test_all_zero_switchovers_fail():
    rep = validate_model(_tl_model(Zero()))
    assert not rep.ok
    assert any("c^i>0" in v for v in rep.violations)


def test_tandem_with_second_arrivals_fails():
    m = PollingModel(
        (QueueSpec(1.0, 0.4, TimeLimited(2.0)), QueueSpec(0.5, 0.4, TimeLimited(2.0))),
        (Deterministic(0.1),) * 2,
        routing=TANDEM,
    )
    rep = validate_model(m)
    assert any("tandem" in v for v in rep.violations)


@pytest.mark.parametrize(
    "queue, fragment",
    [
        (QueueSpec(1.0, 0.0, Exhaustive()), "mean service"),
        (QueueSpec(-1.0, 1.0, Exhaustive()), "arrival rate"),
        (QueueSpec(1.0, 1.0, Autonomous(0.0)), "alpha"),
        (QueueSpec(1.0, 1.0, KLimited(0)), "k must"),
    ],
)
def test_invariant_violations_reported(queue, fragment):
    m = PollingModel((queue, QueueSpec(0.1, 1.0, Exhaustive())), (Deterministic(0.1),) * 2)
    rep = validate_model(m)
    assert any(fragment in v for v in rep.violations)


def test_switchover_count_mismatch():
    m = PollingModel((QueueSpec(0.1, 1.0, Exhaustive()),) * 2, (Deterministic(0.1),))
    assert not validate_model(m).ok


def test_zero_switchover_pgf_is_one():
    z = np.array([0.3 + 0.1j, -0.5])
    assert switchover_arrival_pgf(Zero(), [1.0, 2.0], z) == pytest.approx(1.0)


def test_deterministic_switchover_zero_count():
    val = switchover_arrival_pgf(Deterministic(1.0), [1.0, 0.0], np.array([0.0, 1.0]))
    assert val == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_exponential_switchover_at_one():
    assert switchover_arrival_pgf(Exponential(2.0), [0.5, 0.5], np.ones(2)) == pytest.approx(1.0)


def test_domain_error_outside_polydisc():
    with pytest.raises(DomainError):
        switchover_arrival_pgf(Deterministic(1.0), [1.0, 1.0], np.array([1.1, 0.0]))


angles = st.lists(st.floats(0, 2 * np.pi, allow_nan=False), min_size=3, max_size=3)
rates = st.lists(st.floats(0, 5, allow_nan=False), min_size=3, max_size=3)


@settings(max_examples=60, deadline=None)
@given(angles, rates, st.floats(0, 3), st.floats(0, 3))
def test_switchover_pgf_bounded_on_torus(theta, lam, c, m):
    z = np.exp(1j * np.array(theta))
    for dist in (Deterministic(c), Exponential(m), Zero()):
        assert abs(switchover_arrival_pgf(dist, lam, z)) <= 1 + 1e-12


@settings(max_examples=40, deadline=None)
@given(angles, rates, st.floats(0, 2), st.floats(0, 2))
def test_deterministic_legs_multiply(theta, lam, c1, c2):
    z = np.exp(1j * np.array(theta))
    both = switchover_arrival_pgf(Deterministic(c1 + c2), lam, z)
    legs = switchover_arrival_pgf(Deterministic(c1), lam, z) * switchover_arrival_pgf(Deterministic(c2), lam, z)
    assert abs(both - legs) < 1e-12


def test_custom_switchover_uses_lst():
    gamma2 = CustomSwitchover(lambda s: (1 + s) ** -2, mean=2.0)
    z = np.array([0.5, 1.0])
    expected = (1 + 1.0 * 0.5) ** -2
    assert switchover_arrival_pgf(gamma2, [1.0, 3.0], z) == pytest.approx(expected)
    with pytest.raises(ValueError):
        gamma2.sample(np.random.default_rng(0))


def test_dict_round_trip():
    m = PollingModel(
        (QueueSpec(0.3, 1.0, Autonomous(1.5)), QueueSpec(0.2, 0.5, KLimited(3)), QueueSpec(0.1, 2.0, Exhaustive())),
        (Deterministic(0.2), Exponential(0.3), Zero()),
    )
    assert model_from_dict(model_to_dict(m)) == m


def test_unknown_keys_rejected():
    d = model_to_dict(symmetric_model(2, 0.3, 1.0, TimeLimited(1.0), Deterministic(0.2)))
    d["queues"][0]["discipline"]["beta"] = 1
    with pytest.raises(ValueError):
        model_from_dict(d)
    d = model_to_dict(symmetric_model(2, 0.3, 1.0, TimeLimited(1.0), Deterministic(0.2)))
    d["colour"] = "red"
    with pytest.raises(ValueError):
        model_from_dict(d)


def test_relabel_permutes_queues():
    m = PollingModel(
        (QueueSpec(0.3, 1.0, Exhaustive()), QueueSpec(0.2, 1.0, KLimited(2))),
        (Deterministic(0.1), Deterministic(0.4)),
    )
    r = m.relabel([1, 0])
    assert r.queues == (m.queues[1], m.queues[0])
    assert r.switchovers == (m.switchovers[1], m.switchovers[0])
