"""Seeded scenario generation and the round loop."""
from __future__ import annotations

import csv
import os
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__, kernels
from .bandit import (
    ArmStats, BanditContext, RegretLedger, eg_select, umcb_select, variation_metrics, window_size,
)
from .channel import (
    AntennaGainState, UlaConfig, build_codebook, drift_antenna_gain, expected_normalized_power,
    policy_geometry, reference_power, sample_fade,
)
from .config import ScenarioConfig, dump_config
from .energy import RoundSchedule, UtilitySpec, round_reward, simulate_round
from .errors import ConfigError
from .geometry import Area, grid_centers
from .oracle import RoundParams, gmq, gua, realized_value, upper_bound_p1

TRACE_COLUMNS = (
    "round", "algorithm", "reward", "ub_reward", "gua_true_reward", "alpha_regret_cum", "ub_regret_cum",
)

# substream tags; new purposes get new tags so existing streams never shift
_PURPOSE = {"positions": 0, "context": 1, "fade": 2, "drift": 3, "explore": 4}


def substream(seed: int, purpose: str, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(_PURPOSE[purpose],) + tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


@dataclass
class Scenario:
    cfg: ScenarioConfig
    ula: UlaConfig
    centers: np.ndarray
    sensors: np.ndarray
    array_factor: np.ndarray
    dist2: np.ndarray
    p_ref: float
    spec: UtilitySpec
    params: RoundParams
    initial_gains: np.ndarray

    @property
    def n_policies(self) -> int:
        return self.array_factor.shape[0]

    def deterministic_power(self, gains) -> np.ndarray:
        g2 = np.asarray(gains, dtype=float) ** 2
        return self.array_factor * g2[None, :] / np.repeat(self.dist2, self.cfg.codebook_size, axis=0)

    def expected_powers(self, gains) -> np.ndarray:
        return expected_normalized_power(self.deterministic_power(gains), self.p_ref)


def build_scenario(cfg: ScenarioConfig) -> Scenario:
    area = Area(cfg.width, cfg.height, cfg.epsilon)
    ula = UlaConfig(cfg.n_antennas, cfg.antenna_spacing, cfg.frequency)
    codebook = build_codebook(cfg.codebook_size, ula)
    centers = grid_centers(area)
    if cfg.sensor_positions is not None:
        sensors = np.asarray(cfg.sensor_positions, dtype=float)
        if not all(area.contains(p) for p in sensors):
            raise ConfigError("a listed sensor lies outside the area")
    else:
        rng = substream(cfg.seed, "positions")
        sensors = rng.uniform((0.0, 0.0), (cfg.width, cfg.height), size=(cfg.n_sensors, 2))
    af, dist2 = policy_geometry(sensors, centers, codebook, ula)
    spec = UtilitySpec(cfg.utility, cfg.n_sensors, cfg.utility_table)
    params = RoundParams(cfg.n_slots, cfg.slot_duration, cfg.deadline, cfg.zeta, cfg.capacity, cfg.eta)
    gains = np.full(cfg.n_sensors, cfg.sensor_gain)
    p_ref = reference_power(ula, float(gains.max()), cfg.reference_distance)
    return Scenario(cfg, ula, centers, sensors, af, dist2, p_ref, spec, params, gains)


def generate_context(cfg: ScenarioConfig, rng: np.random.Generator, t: int = 1,
                     gains: Optional[np.ndarray] = None) -> BanditContext:
    """Round-start energies uniform on (0, 0.3 Q]."""
    u = rng.random(cfg.n_sensors)
    return BanditContext(t, 0.3 * cfg.capacity * (1.0 - u), gains)


def gain_path(cfg: ScenarioConfig, initial: np.ndarray) -> np.ndarray:
    """Antenna gains for rounds 1..T; drift steps happen before rounds 2..T."""
    path = np.empty((cfg.rounds, initial.size))
    if cfg.rounds == 0:
        return path
    rate = cfg.drift_rate if cfg.scenario == "nonstationary" else 0.0
    state = AntennaGainState.fresh(initial, rate)
    path[0] = state.current
    for t in range(2, cfg.rounds + 1):
        state = drift_antenna_gain(state, substream(cfg.seed, "drift", t))
        path[t - 1] = state.current
    return path


class FadeBook:
    """|g|^2 per (slot, sensor) for each stop in one round, drawn lazily from keyed streams."""

    def __init__(self, seed: int, t: int, n_slots: int, n_sensors: int):
        self.seed, self.t, self.shape = seed, t, (n_slots, n_sensors)
        self._cache: Dict[int, np.ndarray] = {}

    def at(self, loc: int) -> np.ndarray:
        if loc not in self._cache:
            g = sample_fade(substream(self.seed, "fade", self.t, loc), self.shape)
            self._cache[loc] = np.abs(g) ** 2
        return self._cache[loc]


def realize(schedule: RoundSchedule, det_norm: np.ndarray, fades: FadeBook, n_codewords: int):
    """Raw (unclipped) and clipped normalized power per slot and sensor."""
    raw = np.zeros(fades.shape)
    for n, j in enumerate(schedule.slots):
        if j >= 0:
            raw[n] = fades.at(j // n_codewords)[n] * det_norm[j]
    return raw, np.minimum(raw, 1.0)


@dataclass
class RunResult:
    trace: List[tuple]
    summary: List[dict]
    window: int
    variation: float
    violations: List[str] = field(default_factory=list)
    out_dir: Optional[Path] = None
    final_energies: Dict[str, List[np.ndarray]] = field(default_factory=dict)

    def rewards(self, algorithm: str) -> np.ndarray:
        return np.array([r[2] for r in self.trace if r[1] == algorithm])

    def column(self, algorithm: str, name: str) -> np.ndarray:
        k = TRACE_COLUMNS.index(name)
        return np.array([r[k] for r in self.trace if r[1] == algorithm])


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def _check_round(name, t, schedule, out_final, Q, reward, violations):
    if len(schedule) * schedule.slot_duration > schedule.deadline * (1 + 1e-12):
        violations.append(f"round {t} {name}: schedule exceeds the deadline")
    if np.any(out_final < -1e-9) or np.any(out_final > Q * (1 + 1e-12)):
        violations.append(f"round {t} {name}: energy left [0, Q]")
    if reward < -1e-9:
        violations.append(f"round {t} {name}: negative round reward {reward}")


def run_experiment(cfg: ScenarioConfig, write: bool = True) -> RunResult:
    sc = build_scenario(cfg)
    out_dir = Path(cfg.out_dir)
    if write:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            probe = out_dir / ".write_probe"
            probe.write_text("")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"output directory {out_dir} is not writable: {exc}") from exc

    T = cfg.rounds
    gains = gain_path(cfg, sc.initial_gains)
    expected = np.stack([sc.expected_powers(g) for g in gains]) if T else np.zeros((0,) + sc.array_factor.shape)
    variation = variation_metrics(expected)[1] if T else 0.0
    if cfg.window == "auto":
        w = window_size(max(T, 1), variation)
    else:
        w = int(cfg.window)

    M = cfg.codebook_size
    G, N = sc.n_policies, cfg.n_sensors
    share = cfg.share_by_location
    stats = {
        "umcb": ArmStats(G, N, None, share, M, sc.array_factor),
        "umcb_sw": ArmStats(G, N, w, share, M, sc.array_factor),
        "eg": ArmStats(G, N, None, share, M, sc.array_factor),
    }
    ledgers = {a: RegretLedger(alpha=cfg.alpha) for a in cfg.algorithms}
    trace: List[tuple] = []
    timing: List[tuple] = []
    violations: List[str] = []
    finals: Dict[str, List[np.ndarray]] = {a: [] for a in cfg.algorithms}
    params, spec, Q = sc.params, sc.spec, cfg.capacity

    for t in range(1, T + 1):
        ctx = generate_context(cfg, substream(cfg.seed, "context", t), t, gains[t - 1])
        E = expected[t - 1]
        det_norm = sc.deterministic_power(gains[t - 1]) / sc.p_ref
        fades = FadeBook(cfg.seed, t, cfg.n_slots, N)

        true_sched = gua(E, ctx.energies, spec, params)
        _, true_obs = realize(true_sched, det_norm, fades, M)
        gua_true = realized_value(true_obs, ctx.energies, spec, params, true_sched)
        ub = upper_bound_p1(E, ctx.energies, spec, params)[1]

        for name in cfg.algorithms:
            t0 = time.perf_counter()
            if name == "gua":
                sched = true_sched
            elif name == "gmq":
                sched = gmq(E, params)
            elif name == "eg":
                sched = eg_select(stats["eg"], ctx, spec, params, cfg.epsilon0, substream(cfg.seed, "explore", t))
            else:
                sched = umcb_select(stats[name], ctx, spec, params)
            raw, obs = realize(sched, det_norm, fades, M)
            x = ctx.energies
            out = simulate_round(x, params.rates(x), Q, sched, obs, params.eta)
            reward = round_reward(spec, out.final, out.baseline, Q)
            if name in stats:
                stats[name].update(sched, obs, raw)
            elapsed = time.perf_counter() - t0
            _check_round(name, t, sched, out.final, Q, reward, violations)
            cum_a, cum_u = ledgers[name].append(reward, gua_true, ub)
            trace.append((t, name, reward, ub, gua_true, cum_a, cum_u))
            timing.append((t, name, elapsed))
            if cfg.write_energy_trace:
                finals[name].append(out.final.copy())

    summary = _summarize(cfg, trace)
    result = RunResult(trace, summary, w, variation, violations, out_dir if write else None, finals)
    if write:
        _write_outputs(cfg, sc, result, timing)
    return result


def _summarize(cfg: ScenarioConfig, trace: Sequence[tuple]) -> List[dict]:
    rows = []
    for name in cfg.algorithms:
        r = np.array([row[2] for row in trace if row[1] == name])
        ub = np.array([row[3] for row in trace if row[1] == name])
        star = np.array([row[4] for row in trace if row[1] == name])
        last = [row for row in trace if row[1] == name][-1:] or [(0, name, 0, 0, 0, 0.0, 0.0)]
        tail = max(1, len(r) // 10)
        rows.append({
            "algorithm": name,
            "rounds": len(r),
            "mean_reward": float(r.mean()) if len(r) else 0.0,
            "mean_reward_final10": float(r[-tail:].mean()) if len(r) else 0.0,
            "mean_ub_reward": float(ub.mean()) if len(r) else 0.0,
            "mean_gua_true_reward": float(star.mean()) if len(r) else 0.0,
            "alpha_regret": float(last[0][5]),
            "ub_regret": float(last[0][6]),
        })
    return rows


def _write_outputs(cfg: ScenarioConfig, sc: Scenario, result: RunResult, timing):
    out = Path(cfg.out_dir)
    with open(out / "trace.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for row in result.trace:
            w.writerow([_fmt(v) for v in row])
    with open(out / "timing.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("round", "algorithm", "wall_time_s"))
        for row in timing:
            w.writerow([_fmt(v) for v in row])
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        cols = ("algorithm", "rounds", "mean_reward", "mean_reward_final10", "mean_ub_reward",
                "mean_gua_true_reward", "alpha_regret", "ub_regret")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in result.summary:
            w.writerow([_fmt(row[c]) for c in cols])
    if cfg.write_energy_trace:
        with open(out / "energy.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "algorithm"] + [f"q{i}" for i in range(cfg.n_sensors)])
            for name, rows in result.final_energies.items():
                for t, q in enumerate(rows, start=1):
                    w.writerow([t, name] + [_fmt(v) for v in q])
    lines = [
        f"version: {__version__}",
        f"config_sha256: {cfg.digest()}",
        f"kernel_backend: {kernels.BACKEND}",
        f"window: {result.window}",
        f"variation_V: {result.variation!r}",
        f"reference_power: {sc.p_ref!r}",
        f"hard_violations: {len(result.violations)}",
        "config:",
    ] + ["  " + ln for ln in dump_config(cfg).splitlines()]
    (out / "manifest.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")


def sweep(cfg: ScenarioConfig, axis: str, values: Sequence[float], write: bool = True) -> List[dict]:
    """Mean reward of the final 10% of rounds per algorithm for each value of ``axis``."""
    if axis not in ("Q", "N"):
        raise ConfigError(f"sweep axis must be Q or N, got {axis!r}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    rows = []
    for v in values:
        if axis == "Q":
            sub = cfg.override(capacity=float(v), out_dir=os.path.join(cfg.out_dir, f"Q_{v}"))
        else:
            # listed positions cannot fit a different N; fall back to drawn positions
            sub = replace(cfg, n_sensors=int(v), sensor_positions=None,
                          out_dir=os.path.join(cfg.out_dir, f"N_{int(v)}"))
        res = run_experiment(sub, write=write)
        # utilities carry a 100/N factor, so the round reward is already a per-sensor mean
        for s in res.summary:
            rows.append({"axis": axis, "value": v, "algorithm": s["algorithm"],
                         "mean_reward_final10": s["mean_reward_final10"]})
    if write:
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        with open(Path(cfg.out_dir) / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
            cols = ("axis", "value", "algorithm", "mean_reward_final10")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for r in rows:
                w.writerow([_fmt(r[c]) for c in cols])
    return rows
