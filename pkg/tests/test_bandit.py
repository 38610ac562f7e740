import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from beamcharge.bandit import (
    ArmStats, BanditContext, RegretLedger, alpha_regret, confidence_radius, eg_select, ucb_estimate,
    ucb_matrix, umcb_select, variation_metrics, window_size,
)
from beamcharge.channel import UlaConfig, build_codebook, policy_geometry
from beamcharge.config import ScenarioConfig
from beamcharge.energy import UtilitySpec
from beamcharge.errors import DimensionError, PreconditionError
from beamcharge.experiment import run_experiment
from beamcharge.oracle import ALPHA, RoundParams, gua


def test_ucb_examples():
    s = ArmStats(2, 1)
    assert ucb_estimate(s, 0, 0, 5) == 1.0
    s.update((1,), np.ones((1, 1)))
    assert ucb_estimate(s, 1, 0, 3) == 1.0


def test_ucb_radius_at_e_squared():
    s = ArmStats(1, 1)
    s.update((0, 0, 0), np.zeros((3, 1)))
    t = math.exp(2)
    assert math.sqrt(3 * math.log(t) / (2 * 3)) == pytest.approx(1.0)
    # integer rounds bracket e^2; the radius crosses 1 between t = 7 and t = 8
    assert float(confidence_radius(3, 7)) < 1.0 < float(confidence_radius(3, 8))
    assert ucb_estimate(s, 0, 0, 8) == 1.0


@given(st.lists(st.tuples(st.integers(0, 3), st.floats(0, 1)), min_size=1, max_size=40), st.integers(1, 500))
def test_optimism(pulls, t):
    s = ArmStats(4, 1)
    for j, v in pulls:
        s.update((j,), np.array([[v]]))
    est = ucb_matrix(s, t)
    assert np.all(est >= s.means - 1e-15)
    assert np.all((est >= 0) & (est <= 1))
    for j in range(4):
        assert ucb_estimate(s, j, 0, t) == pytest.approx(est[j, 0])


def test_running_means():
    s = ArmStats(3, 1)
    s.update((2,), np.array([[0.4]]))
    assert s.counts[2] == 1 and s.means[2, 0] == pytest.approx(0.4)
    s = ArmStats(3, 1)
    s.update((1, 1), np.array([[0.2], [0.6]]))
    assert s.means[1, 0] == pytest.approx(0.4)
    with pytest.raises(DimensionError):
        s.update((1, 1), np.zeros((3, 1)))


def test_location_sharing_matches_direct_simulation():
    ula = UlaConfig()
    book = build_codebook(12, ula)
    centers = np.array([[0.5, 0.5], [2.5, 1.5]])
    sensors = np.array([[1.7, 2.9], [3.3, 0.2], [0.1, 1.9]])
    af, dist2 = policy_geometry(sensors, centers, book, ula)
    p_ref = 8.0
    det = af / np.repeat(dist2, 12, axis=0) / p_ref
    rng = np.random.default_rng(8)
    fade = np.abs(rng.standard_normal(3) + 1j * rng.standard_normal(3)) ** 2 / 2
    j = 12 + 5  # stop 1, codeword 5
    raw = fade * det[j]
    s = ArmStats(24, 3, None, True, 12, af)
    s.update((j,), np.minimum(raw, 1.0)[None, :], raw[None, :])
    assert np.all(s.counts[12:] == 1) and np.all(s.counts[:12] == 0)
    # each codeword at the stop under the same fade, simulated directly
    direct = np.minimum(fade[None, :] * det[12:], 1.0)
    assert np.allclose(s.means[12:], direct, rtol=1e-12, atol=1e-300)


def test_sharing_needs_raw_observations():
    s = ArmStats(4, 1, None, True, 2, np.ones((4, 1)))
    with pytest.raises(PreconditionError):
        s.update((0,), np.zeros((1, 1)))


def _feed(stats, rounds, seed):
    rng = np.random.default_rng(seed)
    for _ in range(rounds):
        slots = tuple(int(j) for j in rng.integers(0, stats.n_policies, 4))
        stats.update(slots, rng.random((4, stats.n_sensors)))
    return stats


def test_full_window_equals_unwindowed():
    a = _feed(ArmStats(5, 2), 30, 1)
    b = _feed(ArmStats(5, 2, window=30), 30, 1)
    assert np.array_equal(a.counts, b.counts) and np.array_equal(a.sums, b.sums)


def test_unit_window_keeps_only_last_round():
    s = ArmStats(4, 1, window=1)
    s.update((0, 1), np.full((2, 1), 0.5))
    s.update((2,), np.array([[0.3]]))
    assert s.counts.tolist() == [0, 0, 1, 0]
    assert s.means[2, 0] == pytest.approx(0.3)


@given(st.integers(1, 12), st.lists(st.lists(st.integers(0, 5), min_size=1, max_size=4), min_size=1, max_size=40))
def test_window_recompute_from_scratch(w, rounds):
    s = ArmStats(6, 2, window=w)
    rng = np.random.default_rng(len(rounds))
    hist = []
    for slots in rounds:
        obs = rng.random((len(slots), 2))
        s.update(tuple(slots), obs)
        hist.append((slots, obs))
        counts = np.zeros(6)
        sums = np.zeros((6, 2))
        for sl, ob in hist[-w:]:
            for n, j in enumerate(sl):
                counts[j] += 1
                sums[j] += ob[n]
        assert np.allclose(s.counts, counts) and np.allclose(s.sums, sums, atol=1e-12)


def test_window_size_examples():
    assert window_size(10000, 100) == 10
    assert window_size(100, 0) == 100
    assert window_size(6000, 6000) == 1
    with pytest.raises(PreconditionError):
        window_size(0, 1)


def _eg_setup(n_slots=100):
    stats = _feed(ArmStats(5, 2), 10, 3)
    params = RoundParams(n_slots, 1.0, float(n_slots), 2.0, 100.0)
    ctx = BanditContext(11, np.array([10.0, 20.0]))
    return stats, params, ctx, UtilitySpec("U1", 2)


def test_eg_pure_exploitation_deterministic():
    stats, params, ctx, spec = _eg_setup()
    a = eg_select(stats, ctx, spec, params, 0.0, np.random.default_rng(1))
    b = eg_select(stats, ctx, spec, params, 0.0, np.random.default_rng(2))
    assert a.slots == b.slots


def test_eg_full_exploration_is_uniform():
    stats, params, ctx, spec = _eg_setup(n_slots=1000)
    picks = []
    for seed in range(10):
        s, mask = eg_select(stats, ctx, spec, params, 1.0, np.random.default_rng(seed), return_mask=True)
        assert mask.all()
        picks.extend(s.slots)
    freq = np.bincount(picks, minlength=5) / len(picks)
    assert np.allclose(freq, 0.2, atol=0.02)


def test_eg_exploration_fraction():
    stats, params, ctx, spec = _eg_setup()
    masks = [eg_select(stats, ctx, spec, params, 1 / 3, np.random.default_rng(100 + k), return_mask=True)[1]
             for k in range(100)]
    frac = float(np.concatenate(masks).mean())
    assert 0.31 <= frac <= 0.36


def test_umcb_first_round_all_optimistic():
    stats = ArmStats(3, 2)
    params = RoundParams(4, 1.0, 4.0, 2.0, 10.0)
    ctx = BanditContext(1, np.array([1.0, 2.0]))
    spec = UtilitySpec("U1", 2)
    assert np.all(ucb_matrix(stats, 1) == 1.0)
    # every policy looks identical, so the lowest index wins every slot
    assert umcb_select(stats, ctx, spec, params).slots == (0, 0, 0, 0)
    assert umcb_select(ArmStats(1, 2), ctx, spec, params).slots == (0, 0, 0, 0)


def test_umcb_converges_to_greedy_on_true_means():
    P = np.array([[0.9, 0.1], [0.1, 0.9], [0.4, 0.3], [0.2, 0.2]])
    spec = UtilitySpec("U1", 2)
    params = RoundParams(5, 20.0, 100.0, 2.0, 100.0)
    rng = np.random.default_rng(21)
    stats = ArmStats(4, 2)
    hits = []
    for t in range(1, 2001):
        x = 30 * (1 - rng.random(2))
        s = umcb_select(stats, BanditContext(t, x), spec, params)
        hits.append(s.slots == gua(P, x, spec, params).slots)
        stats.update(s, (rng.random((5, 2)) < P[list(s.slots)]).astype(float))
    assert np.mean(hits[-200:]) >= 0.9


def test_alpha_regret_examples():
    led = RegretLedger()
    led.append(3.0, 10.0, 10.0)
    a, u = alpha_regret(led)
    assert a[-1] == pytest.approx(0.1606, abs=5e-5)
    assert a[-1] == pytest.approx(ALPHA * 10 - 3)
    led = RegretLedger()
    for _ in range(50):
        led.append(0.0, 2.0, 3.0)
    a, u = alpha_regret(led)
    assert np.allclose(a, ALPHA * 2.0 * np.arange(1, 51))
    assert u[-1] == pytest.approx(150.0)
    led = RegretLedger()
    for r in (1.0, 4.0, 2.0):
        led.append(r, r, r)
    a, _ = alpha_regret(led)
    assert np.all(a < 0) and np.all(np.diff(a) < 0)
    assert led.cum_alpha == pytest.approx(a[-1])


def test_alpha_regret_length_mismatch():
    led = RegretLedger(rewards=[1.0], comparator=[1.0, 2.0], upper=[1.0])
    with pytest.raises(DimensionError):
        alpha_regret(led)


def test_variation_examples():
    assert variation_metrics(np.full((5, 3), 0.4)) == (1, 0.0)
    h = np.full((4, 2), 0.3)
    h[2:, 1] += 0.2
    D, V = variation_metrics(h)
    assert D == 2 and V == pytest.approx(0.2)


def test_variation_random_walk_brute_force():
    rng = np.random.default_rng(6)
    h = np.clip(0.5 + np.cumsum(rng.uniform(-0.02, 0.02, (300, 4, 3)), axis=0), 0, 1)
    V = 0.0
    D = 1
    for t in range(1, len(h)):
        m = max(abs(float(a) - float(b)) for a, b in zip(h[t].ravel(), h[t - 1].ravel()))
        V += m
        D += m > 0
    assert variation_metrics(h) == (D, pytest.approx(V, rel=1e-12))


def test_regret_growth_slows():
    cfg = ScenarioConfig(seed=7, rounds=1000, algorithms=("umcb", "gua"))
    R = run_experiment(cfg, write=False).column("umcb", "ub_regret_cum")
    half = len(R) // 2
    assert R[-1] - R[half - 1] <= R[half - 1] + 1e-9
