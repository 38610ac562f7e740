"""Online charging under unknown channel statistics.

Arms are charging policies; a round plays a schedule of N_s slot-arms and
observes every sensor's normalized power in every slot.
"""
from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from . import kernels
from .energy import RoundSchedule, UtilitySpec
from .errors import DimensionError, PreconditionError
from .oracle import ALPHA, RoundParams, gua

# keeps the fade back-solve finite when a codeword has a null towards a sensor
_AF_FLOOR = 1e-300


@dataclass
class ArmStats:
    """Pull counts and running means per policy, optionally over a sliding window.

    With ``share_by_location`` a pull at a stop also updates every other
    codeword at that stop: the fade seen by a sensor does not depend on the
    codeword, so its power under codeword m' is the observed raw power scaled by
    the array-factor ratio.
    """

    n_policies: int
    n_sensors: int
    window: Optional[int] = None
    share_by_location: bool = False
    n_codewords: int = 1
    array_factor: Optional[np.ndarray] = None
    counts: np.ndarray = field(init=False)
    sums: np.ndarray = field(init=False)
    rounds_seen: int = field(init=False, default=0)

    def __post_init__(self):
        if self.n_policies < 1 or self.n_sensors < 1:
            raise PreconditionError("need at least one policy and one sensor")
        if self.window is not None and self.window < 1:
            raise PreconditionError(f"window must be >= 1, got {self.window}")
        if self.share_by_location:
            if self.array_factor is None:
                raise PreconditionError("sharing by location needs the array-factor matrix")
            af = np.asarray(self.array_factor, dtype=float)
            if af.shape != (self.n_policies, self.n_sensors) or self.n_policies % self.n_codewords:
                raise DimensionError("array-factor matrix does not match the policy grid")
            self.array_factor = np.maximum(af, _AF_FLOOR)
        self.counts = np.zeros(self.n_policies)
        self.sums = np.zeros((self.n_policies, self.n_sensors))
        self._history: deque = deque()

    @property
    def means(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            m = self.sums / self.counts[:, None]
        return np.where(self.counts[:, None] > 0, np.clip(m, 0.0, 1.0), 0.0)

    def round_delta(self, slots, observed, raw=None):
        """Count and sum increments contributed by one round's observations."""
        observed = np.asarray(observed, dtype=float)
        slots = list(slots)
        if observed.shape != (len(slots), self.n_sensors):
            raise DimensionError(
                f"observations of shape {observed.shape} do not match {len(slots)} slots x {self.n_sensors} sensors"
            )
        dc = np.zeros(self.n_policies)
        ds = np.zeros((self.n_policies, self.n_sensors))
        if self.share_by_location:
            if raw is None:
                raise PreconditionError("sharing by location needs the unclipped observations")
            raw = np.asarray(raw, dtype=float)
            if raw.shape != observed.shape:
                raise DimensionError("raw and clipped observations differ in shape")
            M = self.n_codewords
            af = self.array_factor
            for n, j in enumerate(slots):
                if j < 0:
                    continue
                lo = (j // M) * M
                scaled = np.minimum(raw[n][None, :] * af[lo:lo + M] / af[j][None, :], 1.0)
                scaled[j - lo] = observed[n]
                dc[lo:lo + M] += 1
                ds[lo:lo + M] += scaled
        else:
            for n, j in enumerate(slots):
                if j < 0:
                    continue
                dc[j] += 1
                ds[j] += observed[n]
        return dc, ds

    def update(self, schedule, observed, raw=None) -> "ArmStats":
        slots = schedule.slots if isinstance(schedule, RoundSchedule) else tuple(schedule)
        dc, ds = self.round_delta(slots, observed, raw)
        self.rounds_seen += 1
        if self.window is None:
            self.counts += dc
            self.sums += ds
            return self
        self._history.append((dc, ds))
        if len(self._history) > self.window:
            self._history.popleft()
            self._recompute()
        else:
            # nothing evicted yet: the running sum equals the sequential recount
            self.counts += dc
            self.sums += ds
        return self

    def _recompute(self):
        counts = np.zeros(self.n_policies)
        sums = np.zeros((self.n_policies, self.n_sensors))
        for dc, ds in self._history:
            counts += dc
            sums += ds
        self.counts, self.sums = counts, sums

    def snapshot(self):
        return self.counts.copy(), self.sums.copy()


@dataclass(frozen=True)
class BanditContext:
    t: int
    energies: np.ndarray
    gains: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.t < 1:
            raise PreconditionError("round index starts at 1")
        e = np.asarray(self.energies, dtype=float)
        if np.any(e <= 0):
            raise PreconditionError("round-start energies must be positive")
        object.__setattr__(self, "energies", e)


def confidence_radius(count, t: int):
    count = np.asarray(count, dtype=float)
    if t < 1:
        raise PreconditionError("round index starts at 1")
    with np.errstate(divide="ignore"):
        return np.where(count > 0, np.sqrt(3.0 * math.log(t) / (2.0 * np.maximum(count, 1e-300))), np.inf)


def ucb_estimate(stats: ArmStats, policy: int, sensor: int, t: int) -> float:
    rho = float(confidence_radius(stats.counts[policy], t))
    if not math.isfinite(rho):
        return 1.0
    return min(float(stats.means[policy, sensor]) + rho, 1.0)


def ucb_matrix(stats: ArmStats, t: int) -> np.ndarray:
    rho = confidence_radius(stats.counts, t)
    est = stats.means + np.where(np.isfinite(rho), rho, 1.0)[:, None]
    return np.minimum(est, 1.0)


def umcb_select(stats: ArmStats, ctx: BanditContext, spec: UtilitySpec, params: RoundParams) -> RoundSchedule:
    """Greedy utility schedule on optimistic power estimates."""
    return gua(ucb_matrix(stats, ctx.t), ctx.energies, spec, params)


# a windowed ArmStats carries the window, so selection is the same call
umcb_sw_select = umcb_select


def eg_select(stats: ArmStats, ctx: BanditContext, spec: UtilitySpec, params: RoundParams,
              epsilon0: float, rng: np.random.Generator, return_mask: bool = False):
    """Per slot: a uniformly random policy with probability epsilon0, else the best
    marginal utility gain on the empirical means."""
    if not 0.0 <= epsilon0 <= 1.0:
        raise PreconditionError(f"epsilon0 must lie in [0, 1], got {epsilon0}")
    H, c = params.per_slot(stats.means, ctx.energies)
    H = np.ascontiguousarray(H)
    Q = params.capacity
    q = ctx.energies.copy()
    picks, mask = [], []
    for n in range(params.n_slots):
        explore = rng.random() < epsilon0
        if explore:
            j = int(rng.integers(stats.n_policies))
        else:
            g = kernels.policy_gains(H, q, c, Q, params.n_slots - n - 1, spec.code, spec.scale, spec.table_array)
            j = int(np.argmax(g))
        picks.append(j)
        mask.append(explore)
        q = np.maximum(np.minimum(q - c + H[j], Q), 0.0)
    sched = RoundSchedule(tuple(picks), params.slot_duration, params.deadline)
    return (sched, np.array(mask)) if return_mask else sched


def window_size(t_horizon: int, variation: float) -> int:
    if t_horizon < 1 or variation < 0:
        raise PreconditionError("need T >= 1 and V >= 0")
    if variation == 0:
        return int(t_horizon)
    return int(min(math.ceil(math.sqrt(t_horizon / variation)), t_horizon))


@dataclass
class RegretLedger:
    rewards: List[float] = field(default_factory=list)
    comparator: List[float] = field(default_factory=list)
    upper: List[float] = field(default_factory=list)
    cum_alpha: float = 0.0
    cum_upper: float = 0.0
    alpha: float = ALPHA

    def append(self, reward: float, comparator: float, upper: float):
        self.rewards.append(float(reward))
        self.comparator.append(float(comparator))
        self.upper.append(float(upper))
        self.cum_alpha += self.alpha * comparator - reward
        self.cum_upper += upper - reward
        return self.cum_alpha, self.cum_upper


def alpha_regret(ledger: RegretLedger, alpha: float = ALPHA):
    """Cumulative alpha-regret against the comparator, and cumulative regret against the upper bound.

    Neither series is clamped at zero.
    """
    r = np.asarray(ledger.rewards, dtype=float)
    star = np.asarray(ledger.comparator, dtype=float)
    ub = np.asarray(ledger.upper, dtype=float)
    if not (r.shape == star.shape == ub.shape):
        raise DimensionError("reward and comparator series differ in length")
    return np.cumsum(alpha * star - r), np.cumsum(ub - r)


def variation_metrics(history) -> tuple:
    """(D, V): 1 + rounds where any mean changed, and the summed max-norm of the changes."""
    h = np.asarray(history, dtype=float)
    if h.shape[0] < 1:
        raise PreconditionError("need at least one round of history")
    h = h.reshape(h.shape[0], -1)
    if h.shape[0] == 1:
        return 1, 0.0
    step = np.abs(np.diff(h, axis=0)).max(axis=1)
    return 1 + int(np.count_nonzero(step > 0)), float(step.sum())
