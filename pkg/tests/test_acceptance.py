"""Acceptance criteria, each at its pinned tolerance and runtime budget.

Every test appends one PASS/FAIL line to ``RESULTS``; the terminal summary
hook in conftest prints them after the run. Running this file directly
prints the same lines.
"""
import time

import numpy as np
import pytest

from beamcharge.experiment import run_experiment, sweep
from beamcharge.oracle import ALPHA
from beamcharge import validation as v

RESULTS = []

# tolerances and budgets, pinned
APPROX_FLOOR = 0.3161
APPROX_GOOD_RATIO = 0.9
APPROX_GOOD_FRACTION = 0.95
CHAIN_SLACK = 1e-9
FADE_MEAN_RANGE = (0.98, 1.02)
MC_REL_TOL = 0.02
MATCHED_REL_TOL = 1e-9
P1_REL_TOL = 1e-4
UMCB_FINAL_FRACTION = 0.90
SUBLINEAR_FACTOR = 0.5
GMQ_GAP_MIN = 0.15
SW_FRACTION = 0.85
BUDGET = {1: 60, 3: 30, 4: 30, 5: 120, 6: 600, 7: 600, 8: 600, 9: 60}


def _record(num, title, ok, **detail):
    extras = " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in detail.items())
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] criterion {num:2d} {title}: {extras}")


@pytest.fixture(scope="module")
def approx_run():
    t0 = time.perf_counter()
    study = v.approximation_study(200, v.SEEDS["approx"])
    return study, time.perf_counter() - t0


@pytest.fixture(scope="module")
def desk_run():
    t0 = time.perf_counter()
    res = run_experiment(v.desk_config(), write=False)
    return res, time.perf_counter() - t0


def test_c01_greedy_approximation(approx_run):
    s, secs = approx_run
    floor_ok = bool(np.all(s.ratios >= APPROX_FLOOR)) and bool(np.all(s.ratios >= ALPHA))
    frac = float(np.mean(s.ratios >= APPROX_GOOD_RATIO))
    ok = len(s.ratios) == 200 and floor_ok and frac >= APPROX_GOOD_FRACTION and secs < BUDGET[1]
    _record(1, "greedy vs exhaustive optimum", ok, instances=len(s.ratios), min_ratio=float(s.ratios.min()),
            frac_ge_0_9=frac, seconds=secs)
    assert ok


def test_c02_dominance_chain(approx_run):
    s, _ = approx_run
    gmq_bad = int(np.sum(s.gmq > s.gua + CHAIN_SLACK))
    ub_bad = int(np.sum(s.gua > s.p1 + CHAIN_SLACK))
    ok = gmq_bad == 0 and ub_bad == 0
    _record(2, "max-energy <= greedy <= relaxed bound", ok, gmq_above_gua=gmq_bad, gua_above_bound=ub_bad)
    assert ok


def test_c03_discretization_bound():
    res = v.check_discretization_bound(50)
    d = res.detail
    ok = d["configs"] == 50 and d["violations"] == 0 and res.seconds < BUDGET[3]
    _record(3, "in-grid power ratio <= discretization bound", ok, configs=d["configs"],
            violations=d["violations"], max_ratio_over_bound=d["max_ratio_over_bound"], seconds=res.seconds)
    assert ok


def test_c04_channel_statistics():
    res = v.check_channel_statistics(100_000, 20)
    d = res.detail
    ok = (FADE_MEAN_RANGE[0] <= d["fade_mean"] <= FADE_MEAN_RANGE[1] and d["worst_mc_rel_err"] <= MC_REL_TOL
          and d["matched_rel_err"] <= MATCHED_REL_TOL and res.seconds < BUDGET[4])
    _record(4, "channel statistics", ok, fade_mean=d["fade_mean"], worst_mc_rel_err=d["worst_mc_rel_err"],
            matched_rel_err=d["matched_rel_err"], seconds=res.seconds)
    assert ok


def test_c05_relaxed_bound_solver():
    res = v.check_p1_solver(50)
    gap = res.detail["max_rel_gap"]
    ok = gap <= P1_REL_TOL and res.seconds < BUDGET[5]
    _record(5, "relaxed bound vs simplex grid search", ok, max_rel_gap=gap, seconds=res.seconds)
    assert ok


def test_c06_learner_convergence(desk_run):
    res, secs = desk_run
    r = res.rewards("umcb")
    star = res.rewards("gua")
    R = res.column("umcb", "ub_regret_cum")
    ratio = float(r[-200:].mean() / star[-200:].mean())
    per_T = float(R[1999] / 2000)
    per_200 = float(R[199] / 200)
    ok = len(r) == 2000 and ratio >= UMCB_FINAL_FRACTION and per_T < SUBLINEAR_FACTOR * per_200 and secs < BUDGET[6]
    _record(6, "learner convergence and sublinear regret", ok, final200_over_gua=ratio,
            R_T_over_T=per_T, R_200_over_200=per_200, seconds=secs)
    assert ok


def test_c07_greedy_vs_max_energy():
    t0 = time.perf_counter()
    values = (100, 200, 300, 500)
    rows = sweep(v.desk_config(algorithms=("gua", "gmq")), "Q", list(values), write=False)
    secs = time.perf_counter() - t0
    by = {(row["value"], row["algorithm"]): row["mean_reward_final10"] for row in rows}
    gaps = {q: by[(q, "gua")] / by[(q, "gmq")] - 1.0 for q in values}
    ok = (all(g > 0 for g in gaps.values()) and all(gaps[q] >= GMQ_GAP_MIN for q in values if q >= 300)
          and secs < BUDGET[7])
    _record(7, "greedy beats max-energy over Q", ok, **{f"gap_Q{q}": g for q, g in gaps.items()}, seconds=secs)
    assert ok


def test_c08_sliding_window_tracking():
    t0 = time.perf_counter()
    cfg = v.desk_config(scenario="nonstationary", drift_rate=0.05, window="auto",
                        algorithms=("umcb", "umcb_sw", "gua"))
    res = run_experiment(cfg, write=False)
    secs = time.perf_counter() - t0
    sw = float(res.rewards("umcb_sw")[-200:].mean())
    um = float(res.rewards("umcb")[-200:].mean())
    star = float(res.rewards("gua")[-200:].mean())
    ok = sw >= um and sw >= SW_FRACTION * star and secs < BUDGET[8]
    _record(8, "windowed learner tracks drift", ok, window=res.window, V=res.variation, sw_final200=sw,
            umcb_final200=um, sw_over_gua=sw / star, seconds=secs)
    assert ok


def test_c09_submodularity():
    t0 = time.perf_counter()
    mono = dr = 0
    instances = v.tiny_instances(60, v.SEEDS["submod"], max_sensors=3, max_policies=3, max_slots=3)
    for inst in instances:
        a, b = v.submodularity_violations(inst)
        mono += a
        dr += b
    secs = time.perf_counter() - t0
    ok = mono == 0 and dr == 0 and secs < BUDGET[9]
    _record(9, "monotone submodular round reward", ok, instances=len(instances),
            monotonicity_violations=mono, diminishing_returns_violations=dr, seconds=secs)
    assert ok


def test_c10_determinism(tmp_path):
    a = v.desk_config(out_dir=str(tmp_path / "a"))
    b = a.override(out_dir=str(tmp_path / "b"))
    run_experiment(a)
    run_experiment(b)
    same = (tmp_path / "a" / "trace.csv").read_bytes() == (tmp_path / "b" / "trace.csv").read_bytes()
    _record(10, "byte-identical traces for one seed", same, rounds=a.rounds)
    assert same


if __name__ == "__main__":
    import sys
    code = pytest.main([__file__, "-q", "-p", "no:cacheprovider"])
    sys.exit(code)
