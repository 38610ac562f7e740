"""Full-information schedulers: utility greedy (plain and lazy), max-energy
greedy, exhaustive search for tiny instances, and the continuous upper bound."""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

import numpy as np

from . import kernels
from .energy import RoundSchedule, UtilitySpec, check_deadline, simulate_round, round_reward
from .errors import DimensionError, ModelError, PreconditionError

ALPHA = 0.5 - 0.5 / np.e


@dataclass(frozen=True)
class RoundParams:
    n_slots: int
    slot_duration: float
    deadline: float
    zeta: float
    capacity: float
    eta: float = 1.0

    def __post_init__(self):
        if self.n_slots < 0:
            raise PreconditionError("n_slots must be non-negative")
        if self.capacity <= 0:
            raise ModelError("capacity must be positive")
        if self.zeta < 1:
            raise ModelError(f"zeta={self.zeta} < 1 lets an idle sensor deplete within the round")
        check_deadline(self.n_slots, self.slot_duration, self.deadline)

    def rates(self, initial) -> np.ndarray:
        """Consumption per unit time for each sensor."""
        return np.asarray(initial, dtype=float) / (self.zeta * self.deadline)

    def per_slot(self, powers, initial):
        """Per-slot harvest matrix and per-slot consumption vector."""
        H = self.eta * self.slot_duration * np.asarray(powers, dtype=float)
        c = self.rates(initial) * self.slot_duration
        return H, c


@dataclass(frozen=True)
class ExpectedPowerMatrix:
    """|policies| x |sensors| expected normalized powers."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DimensionError(f"power matrix must be 2-D, got shape {v.shape}")
        if v.shape[0] == 0:
            raise PreconditionError("empty policy set")
        if not np.all(np.isfinite(v)) or np.any(v < 0) or np.any(v > 1):
            raise ModelError("normalized powers must lie in [0, 1]")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True)
class ContinuousAllocation:
    t: np.ndarray
    budget: float

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if np.any(t < -1e-12) or t.sum() > self.budget * (1 + 1e-9):
            raise ModelError("allocation must be non-negative and within the time budget")
        object.__setattr__(self, "t", np.maximum(t, 0.0))


def _powers(powers) -> np.ndarray:
    if isinstance(powers, ExpectedPowerMatrix):
        return powers.values
    return ExpectedPowerMatrix(powers).values


def _check_initial(P: np.ndarray, initial, capacity: float) -> np.ndarray:
    x = np.asarray(initial, dtype=float)
    if x.shape != (P.shape[1],):
        raise DimensionError(f"{P.shape[1]} sensors in the power matrix but {x.size} energies")
    if np.any(x < 0) or np.any(x > capacity * (1 + 1e-12)):
        raise ModelError(f"initial energies must lie in [0, {capacity}]")
    return x


def _schedule(picks, params: RoundParams) -> RoundSchedule:
    return RoundSchedule(tuple(int(p) for p in picks), params.slot_duration, params.deadline)


def gua(powers, initial, spec: UtilitySpec, params: RoundParams) -> RoundSchedule:
    """Greedy utility schedule: each slot takes the policy with the largest marginal gain."""
    P = _powers(powers)
    x = _check_initial(P, initial, params.capacity)
    H, c = params.per_slot(P, x)
    picks, _ = kernels.greedy_schedule(
        H, x, c, params.capacity, params.n_slots, spec.code, spec.scale, spec.table_array
    )
    return _schedule(picks, params)


def _upper_bounds(H, q, c, Q, rem, spec: UtilitySpec) -> np.ndarray:
    # gain without the battery ceiling, padded for rounding so it never undercuts the exact gain
    b = kernels.policy_gains(H, q, c, Q, rem, spec.code, spec.scale, spec.table_array, False)
    top = kernels.utility(np.maximum(q - c + H - rem * c, 0.0) / Q, spec.code, spec.scale, spec.table_array)
    return b + 1e-11 * (np.abs(b) + top.sum(axis=1))


def gua_lazy(powers, initial, spec: UtilitySpec, params: RoundParams) -> RoundSchedule:
    """Same schedule as :func:`gua`, evaluating fewer exact gains.

    The exact gain can grow along the trajectory because the cap on the
    end-of-round level rises as fewer idle slots remain, so cached exact gains
    are not valid bounds. The uncapped gain is: the idle-end level never
    decreases, and concavity makes the uncapped gain shrink as it rises.
    """
    P = _powers(powers)
    x = _check_initial(P, initial, params.capacity)
    H, c = params.per_slot(P, x)
    Q = params.capacity
    n_slots = params.n_slots
    if n_slots == 0:
        return _schedule((), params)
    if np.any(x - n_slots * c < 0):
        # the lower clamp could bind, and the bound argument no longer holds
        return gua(P, x, spec, params)
    H = np.ascontiguousarray(H)
    q = x.copy()
    bounds = _upper_bounds(H, q, c, Q, n_slots - 1, spec)
    heap = [(-float(b), j) for j, b in enumerate(bounds)]
    heapq.heapify(heap)
    picks = []
    for n in range(n_slots):
        rem = n_slots - n - 1
        best_g, best_j = -np.inf, -1
        popped = []
        while heap:
            neg_b, j = heap[0]
            b = -neg_b
            if b < best_g or (b == best_g and j > best_j):
                break
            heapq.heappop(heap)
            popped.append(j)
            g = float(kernels.policy_gains(H[j:j + 1], q, c, Q, rem, spec.code, spec.scale, spec.table_array)[0])
            if g > best_g or (g == best_g and j < best_j):
                best_g, best_j = g, j
        fresh = _upper_bounds(H[popped], q, c, Q, rem, spec)
        for j, b in zip(popped, fresh):
            heapq.heappush(heap, (-float(b), j))
        picks.append(best_j)
        q = np.maximum(np.minimum(q - c + H[best_j], Q), 0.0)
    return _schedule(picks, params)


def gmq(powers, params: RoundParams) -> RoundSchedule:
    """Max total received power in every slot, ignoring battery levels."""
    P = _powers(powers)
    j = int(np.argmax(P.sum(axis=1)))
    return _schedule([j] * params.n_slots, params)


def _realized(P: np.ndarray, slots: Sequence[int]) -> np.ndarray:
    out = np.zeros((len(slots), P.shape[1]))
    for n, j in enumerate(slots):
        if j >= 0:
            out[n] = P[j]
    return out


def schedule_value(powers, initial, spec: UtilitySpec, params: RoundParams, schedule) -> float:
    """Round reward of a schedule when each policy delivers its row of ``powers``; -1 slots idle."""
    P = np.asarray(powers, dtype=float)
    slots = schedule.slots if isinstance(schedule, RoundSchedule) else tuple(schedule)
    sched = schedule if isinstance(schedule, RoundSchedule) else _schedule(slots, params)
    x = np.asarray(initial, dtype=float)
    out = simulate_round(x, params.rates(x), params.capacity, sched, _realized(P, slots), params.eta)
    return round_reward(spec, out.final, out.baseline, params.capacity)


def realized_value(slot_powers, initial, spec: UtilitySpec, params: RoundParams, schedule: RoundSchedule) -> float:
    """Round reward when slot ``n`` delivers ``slot_powers[n]`` (already realized, N_s x N)."""
    x = np.asarray(initial, dtype=float)
    out = simulate_round(x, params.rates(x), params.capacity, schedule, slot_powers, params.eta)
    return round_reward(spec, out.final, out.baseline, params.capacity)


def set_value(powers, initial, spec: UtilitySpec, params: RoundParams,
              chosen: Iterable[Tuple[int, int]]) -> float:
    """Reward of a set of (slot, policy) pairs; policies sharing a slot add their powers.

    Slots without a pair are idle. This is the set function the greedy
    schedule maximizes.
    """
    P = np.asarray(powers, dtype=float)
    x = np.asarray(initial, dtype=float)
    slot_p = np.zeros((params.n_slots, P.shape[1]))
    for n, j in chosen:
        if not 0 <= n < params.n_slots:
            raise PreconditionError(f"slot {n} outside the round")
        slot_p[n] += P[j]
    idle = RoundSchedule((-1,) * params.n_slots, params.slot_duration, params.deadline)
    out = simulate_round(x, params.rates(x), params.capacity, idle, slot_p, params.eta)
    return round_reward(spec, out.final, out.baseline, params.capacity)


def exhaustive_opt(powers, initial, spec: UtilitySpec, params: RoundParams) -> Tuple[RoundSchedule, float]:
    """Best schedule by enumerating all |policies|^N_s assignments (tiny instances only)."""
    P = _powers(powers)
    x = _check_initial(P, initial, params.capacity)
    if P.shape[0] ** params.n_slots > 2_000_000:
        raise PreconditionError("instance too large for exhaustive search")
    best, best_v = None, -np.inf
    for slots in itertools.product(range(P.shape[0]), repeat=params.n_slots):
        v = schedule_value(P, x, spec, params, slots)
        if v > best_v:
            best, best_v = slots, v
    return _schedule(best, params), float(best_v)


def upper_bound_p1(powers, initial, spec: UtilitySpec, params: RoundParams,
                   tol: float = 1e-6, max_iter: int = 10_000) -> Tuple[ContinuousAllocation, float]:
    """Continuous-time, uncapped relaxation of the round problem.

    Charging time is split freely over policies within the deadline and the
    battery has no ceiling. The idle baseline is the level after N_s slots of
    consumption, the same one the discrete reward subtracts.
    """
    P = _powers(powers)
    x = _check_initial(P, initial, params.capacity)
    Q = params.capacity
    C = np.maximum(x - params.rates(x) * params.n_slots * params.slot_duration, 0.0)
    t, val, _gap, _it = kernels.fw_p1(
        params.eta * P, C, Q, params.deadline, spec.code, spec.scale, spec.table_array, tol, max_iter
    )
    base = float(np.sum(kernels.utility(C / Q, spec.code, spec.scale, spec.table_array)))
    return ContinuousAllocation(t, params.deadline), float(val - base)


def p1_objective(powers, initial, spec: UtilitySpec, params: RoundParams, t) -> float:
    """Relaxed objective at a given time allocation (reference evaluation)."""
    P = np.asarray(powers, dtype=float)
    x = np.asarray(initial, dtype=float)
    Q = params.capacity
    C = np.maximum(x - params.rates(x) * params.n_slots * params.slot_duration, 0.0)
    q = C + params.eta * np.asarray(t, dtype=float) @ P
    return float(np.sum(spec(q / Q)) - np.sum(spec(C / Q)))


def guarantee_condition(spec: UtilitySpec, zeta: float, rate, t_c: float, capacity: float) -> bool:
    """Sufficient condition for the greedy approximation guarantee."""
    if zeta >= 2:
        return True
    r = np.atleast_1d(np.asarray(rate, dtype=float))
    hi = spec(zeta * r * t_c / capacity)
    lo = spec((zeta - 1) * r * t_c / capacity)
    return bool(np.all(hi <= 2 * lo + 1e-12 * np.maximum(1.0, np.abs(hi))))
