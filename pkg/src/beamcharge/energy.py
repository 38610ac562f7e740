"""Sensor energy within one charging round, and the utility that scores it.

Energies are in normalized units: one slot at normalized power 1 delivers
``eta * t_u`` units.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, DomainError, ModelError, RealTimeViolation
from . import kernels

_UTILITY_CODES = {"U1": kernels.U1, "U2": kernels.U2, "table": kernels.TABLE}

# lattice used to verify the shape of a utility function at construction
_SHAPE_LATTICE = 1000


@dataclass(frozen=True)
class SensorState:
    position: Tuple[float, float]
    capacity: float
    energy: float
    consumption_rate: float = 0.0
    antenna_gain: float = 1.0

    def __post_init__(self):
        if not 0 <= self.energy <= self.capacity:
            raise ModelError(f"energy {self.energy} outside [0, {self.capacity}]")
        if self.consumption_rate < 0:
            raise ModelError("consumption rate must be non-negative")


@dataclass(frozen=True)
class UtilitySpec:
    """Per-sensor utility of the end-of-round state of charge sigma = q/Q.

    ``U1`` is (100/N) sqrt(sigma), ``U2`` is (100/N) sqrt(sigma/(1+sigma)).
    ``table`` interpolates utility values given on a uniform sigma lattice over
    [0, 1] and continues with the last slope beyond 1.
    """

    kind: str = "U1"
    n_sensors: int = 1
    table: Optional[Tuple[float, ...]] = None
    lipschitz_B: float = field(init=False, default=0.0)

    def __post_init__(self):
        if self.kind not in _UTILITY_CODES:
            raise ModelError(f"unknown utility kind {self.kind!r}")
        if self.n_sensors < 1:
            raise ModelError("n_sensors must be >= 1")
        if self.kind == "table":
            if self.table is None or len(self.table) < 2:
                raise ModelError("a table utility needs at least two lattice values")
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
        self._check_shape()
        object.__setattr__(self, "lipschitz_B", lipschitz_bound(self))

    @property
    def code(self) -> int:
        return _UTILITY_CODES[self.kind]

    @property
    def scale(self) -> float:
        return 1.0 if self.kind == "table" else 100.0 / self.n_sensors

    @property
    def table_array(self) -> np.ndarray:
        if self.kind == "table":
            return np.asarray(self.table, dtype=float)
        return np.zeros(2)

    def __call__(self, sigma):
        return kernels.utility(np.asarray(sigma, dtype=float), self.code, self.scale, self.table_array)

    def derivative(self, sigma):
        return kernels.utility_grad(np.asarray(sigma, dtype=float), self.code, self.scale, self.table_array)

    def _check_shape(self):
        s = np.linspace(0.0, 1.0, _SHAPE_LATTICE)
        u = self(s)
        du = np.diff(u)
        tol = 1e-12 * max(1.0, float(np.max(np.abs(u))))
        if np.any(u < -tol):
            raise ModelError("utility must be non-negative on [0, Q]")
        if np.any(du < -tol):
            raise ModelError("utility must be non-decreasing on [0, Q]")
        if np.any(np.diff(du) > tol):
            raise ModelError("utility must have non-increasing increments (concave) on [0, Q]")


@dataclass(frozen=True)
class RoundSchedule:
    """Policy index per slot; -1 marks an idle slot."""

    slots: Tuple[int, ...]
    slot_duration: float
    deadline: float

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(int(s) for s in self.slots))
        check_deadline(len(self.slots), self.slot_duration, self.deadline)

    def __len__(self):
        return len(self.slots)


@dataclass(frozen=True)
class RoundOutcome:
    final: np.ndarray
    baseline: np.ndarray
    overflow: np.ndarray
    depletion: np.ndarray


def check_deadline(n_slots: int, slot_duration: float, deadline: float) -> None:
    if slot_duration <= 0 or deadline <= 0:
        raise RealTimeViolation("slot duration and deadline must be positive")
    if n_slots * slot_duration > deadline * (1 + 1e-12):
        raise RealTimeViolation(
            f"real-time deadline violated: N_s * t_u = {n_slots} * {slot_duration} "
            f"> T_c = {deadline} (need N_s * t_u <= T_c)"
        )


def consumption_rate(x, zeta: float, t_c: float):
    """Rate at which an uncharged sensor loses x/zeta over one round of length t_c."""
    if zeta < 1:
        raise ModelError(f"zeta={zeta} < 1 would let a sensor deplete within the round")
    if t_c <= 0:
        raise ModelError("round length must be positive")
    return np.asarray(x, dtype=float) / (zeta * t_c) if np.ndim(x) else float(x) / (zeta * t_c)


def uncharged_residual(x, rate, n: int, t_u: float):
    out = np.maximum(np.asarray(x, dtype=float) - n * np.asarray(rate, dtype=float) * t_u, 0.0)
    return float(out) if out.ndim == 0 else out


def simulate_round(
    energies: Sequence[float],
    rates: Sequence[float],
    capacity: float,
    schedule: RoundSchedule,
    realized_powers: np.ndarray,
    eta: float = 1.0,
) -> RoundOutcome:
    """Slot-by-slot battery update with clipping to [0, Q] after every slot."""
    x = np.asarray(energies, dtype=float)
    c = np.asarray(rates, dtype=float) * schedule.slot_duration
    p = np.asarray(realized_powers, dtype=float)
    if p.shape != (len(schedule), x.size) or c.shape != x.shape:
        raise DimensionError(
            f"expected powers of shape {(len(schedule), x.size)}, got {p.shape}"
        )
    if np.any(p < 0):
        raise ValueError("realized powers must be non-negative")
    gain = eta * schedule.slot_duration * p
    q = x.copy()
    overflow = np.zeros_like(q)
    depletion = np.zeros_like(q)
    for n in range(len(schedule)):
        q = q - c + gain[n]
        over = np.maximum(q - capacity, 0.0)
        under = np.maximum(-q, 0.0)
        overflow += over
        depletion += under
        q = q - over + under
    baseline = uncharged_residual(x, np.asarray(rates, dtype=float), len(schedule), schedule.slot_duration)
    return RoundOutcome(q, np.atleast_1d(baseline), overflow, depletion)


def utility(spec: UtilitySpec, q, capacity: float):
    q = np.asarray(q, dtype=float)
    if np.any(q < 0) or np.any(q > capacity * (1 + 1e-12)):
        raise DomainError(f"energy outside [0, {capacity}]")
    out = spec(np.minimum(q / capacity, 1.0))
    return float(out) if out.ndim == 0 else out


def round_reward(spec: UtilitySpec, final, baseline, capacity: float) -> float:
    final = np.asarray(final, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if final.shape != baseline.shape:
        raise DimensionError("final and baseline energies differ in length")
    return float(np.sum(utility(spec, final, capacity)) - np.sum(utility(spec, baseline, capacity)))


def lipschitz_bound(spec: UtilitySpec, points: int = 1001, sigma_min: float = 0.0) -> float:
    """Largest lattice slope of U in sigma units, i.e. the smallest valid B on the lattice."""
    s = sigma_min + (1.0 - sigma_min) * np.arange(points) / (points - 1)
    u = spec(s)
    return float(max(0.0, np.max(np.diff(u) / np.diff(s))))
