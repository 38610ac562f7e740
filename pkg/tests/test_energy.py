import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from beamcharge.energy import (
    RoundSchedule, SensorState, UtilitySpec, consumption_rate, lipschitz_bound, round_reward,
    simulate_round, uncharged_residual, utility,
)
from beamcharge.errors import DimensionError, DomainError, ModelError, RealTimeViolation


def test_consumption_rate_examples():
    assert consumption_rate(100, 2, 1000) == 0.05
    assert consumption_rate(0, 3, 10) == 0.0
    assert consumption_rate(100, 1, 100) == 1.0
    with pytest.raises(ModelError):
        consumption_rate(100, 0.5, 100)


def test_uncharged_residual_closed_form():
    rate = consumption_rate(100, 2, 1000)
    # slot-wise summation oracle
    level = 100.0
    for _ in range(1000):
        level -= rate * 1.0
    assert uncharged_residual(100, rate, 1000, 1.0) == pytest.approx(level)
    assert uncharged_residual(100, rate, 1000, 1.0) == pytest.approx(100 * (1 - 1 / 2))
    assert uncharged_residual(100, rate, 0, 1.0) == 100
    assert uncharged_residual(100, 10.0, 50, 1.0) == 0.0


def test_deadline_guard():
    with pytest.raises(RealTimeViolation, match=r"N_s \* t_u <= T_c"):
        RoundSchedule((0,) * 11, 100.0, 1000.0)
    assert len(RoundSchedule((0,) * 10, 100.0, 1000.0)) == 10


def test_sensor_state_invariants():
    with pytest.raises(ModelError):
        SensorState((0, 0), 10.0, 11.0)
    with pytest.raises(ModelError):
        SensorState((0, 0), 10.0, 5.0, consumption_rate=-1)


def _round(x, zeta=2.0, t_c=100.0, n=10, t_u=10.0):
    return np.asarray(x, float), np.asarray(x, float) / (zeta * t_c), RoundSchedule((0,) * n, t_u, t_c)


def test_no_charge_ends_at_baseline():
    x, r, sched = _round([10.0, 40.0])
    out = simulate_round(x, r, 100.0, sched, np.zeros((10, 2)))
    assert np.allclose(out.final, out.baseline)
    assert np.allclose(out.baseline, x / 2)


def test_balanced_charge_holds_level():
    x, r, sched = _round([30.0])
    out = simulate_round(x, r, 100.0, sched, np.full((10, 1), r[0]))
    assert out.final[0] == pytest.approx(30.0)


def test_overflow_clamps_to_capacity():
    x, r, sched = _round([30.0])
    p = np.zeros((10, 1))
    p[0] = 50.0
    out = simulate_round(x, r, 100.0, sched, p)
    assert out.overflow[0] > 0
    assert out.final[0] == pytest.approx(100.0 - 9 * r[0] * 10)


def test_simulate_round_shape_checked():
    x, r, sched = _round([1.0, 2.0])
    with pytest.raises(DimensionError):
        simulate_round(x, r, 100.0, sched, np.zeros((9, 2)))


@given(
    arrays(float, (6, 3), elements=st.floats(0, 3)),
    arrays(float, 3, elements=st.floats(0, 100)),
    st.floats(1, 4),
)
def test_slot_energy_accounting(p, x, zeta):
    """Per-sensor: final - initial = harvest - consumption - overflow + depletion slack."""
    Q, t_c, t_u = 100.0, 60.0, 10.0
    rates = x / (zeta * t_c)
    sched = RoundSchedule((0,) * 6, t_u, t_c)
    out = simulate_round(x, rates, Q, sched, p)
    lhs = out.final - x
    rhs = p.sum(axis=0) * t_u - 6 * rates * t_u - out.overflow + out.depletion
    assert np.allclose(lhs, rhs, atol=1e-9)
    assert np.all(out.overflow >= 0) and np.all(out.depletion >= 0)
    assert np.all((out.final >= 0) & (out.final <= Q))


@given(arrays(float, (5, 2), elements=st.floats(0, 1)), arrays(float, 2, elements=st.floats(0.01, 30)))
def test_reward_non_negative(p, x):
    spec = UtilitySpec("U1", 2)
    rates = x / (2 * 1000.0)
    out = simulate_round(x, rates, 500.0, RoundSchedule((0,) * 5, 20.0, 1000.0), p)
    assert round_reward(spec, out.final, out.baseline, 500.0) >= -1e-12


def test_utility_examples():
    assert utility(UtilitySpec("U1", 20), 0.25, 1.0) == pytest.approx(2.5)
    assert utility(UtilitySpec("U1", 20), 0.0, 1.0) == 0.0
    assert utility(UtilitySpec("U2", 20), 1.0, 1.0) == pytest.approx(5 * math.sqrt(0.5))
    assert utility(UtilitySpec("U2", 20), 1.0, 1.0) == pytest.approx(3.5355, abs=1e-4)
    with pytest.raises(DomainError):
        utility(UtilitySpec("U1", 2), 1.5, 1.0)
    with pytest.raises(DomainError):
        utility(UtilitySpec("U1", 2), -0.1, 1.0)


def test_utility_spec_rejects_convex_table():
    with pytest.raises(ModelError):
        UtilitySpec("table", 1, (0.0, 0.1, 1.0))
    with pytest.raises(ModelError):
        UtilitySpec("table", 1, (1.0, 0.5))


def test_round_reward_examples():
    spec = UtilitySpec("U1", 1)
    assert round_reward(spec, [0.3, 0.7], [0.3, 0.7], 1.0) == 0.0
    assert round_reward(spec, [1.0], [0.25], 1.0) == pytest.approx(50.0)
    a = round_reward(UtilitySpec("U1", 3), [0.9, 0.4, 0.2], [0.1, 0.3, 0.05], 1.0)
    b = round_reward(UtilitySpec("U1", 3), [0.2, 0.9, 0.4], [0.05, 0.1, 0.3], 1.0)
    assert a == pytest.approx(b)


def test_lipschitz_examples():
    # steepest lattice step sits at the bottom of the lattice for a concave U
    b = lipschitz_bound(UtilitySpec("U1", 1), points=100, sigma_min=0.01)
    assert b == pytest.approx(100 * (math.sqrt(0.02) - math.sqrt(0.01)) / 0.01)
    assert math.isfinite(UtilitySpec("U1", 1).lipschitz_B)
    assert lipschitz_bound(UtilitySpec("table", 1, (0.0, 0.0))) == 0.0
    base = lipschitz_bound(UtilitySpec("table", 1, (0.0, 0.5, 0.75)))
    assert lipschitz_bound(UtilitySpec("table", 1, (0.0, 1.5, 2.25))) == pytest.approx(3 * base)


@given(st.sampled_from(["U1", "U2"]), st.integers(1, 30),
       st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_utility_shape(kind, n, a, b, c):
    spec = UtilitySpec(kind, n)
    lo, mid, hi = sorted((a, b, c))
    u = spec(np.array([lo, mid, hi]))
    assert np.all(u >= 0) and u[0] <= u[1] <= u[2]
    # concavity: the chord lies below the curve
    if hi > lo:
        w = (mid - lo) / (hi - lo)
        assert u[1] >= (1 - w) * u[0] + w * u[2] - 1e-9
