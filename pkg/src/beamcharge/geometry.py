"""Field discretization into charger stops and the in-grid power-ratio bound."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigError, PreconditionError

Point = Tuple[float, float]

# relative slack when checking that width/height are multiples of epsilon
_DIVISIBILITY_TOL = 1e-9


@dataclass(frozen=True)
class Area:
    width: float
    height: float
    epsilon: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ConfigError(f"area must have positive size, got {self.width}x{self.height}")
        if not (0 < self.epsilon <= min(self.width, self.height)):
            raise ConfigError(
                f"grid edge epsilon={self.epsilon} must lie in (0, {min(self.width, self.height)}]"
            )
        for name, size in (("width", self.width), ("height", self.height)):
            ratio = size / self.epsilon
            if abs(ratio - round(ratio)) > _DIVISIBILITY_TOL * max(1.0, ratio):
                raise ConfigError(f"{name}={size} is not an integer multiple of epsilon={self.epsilon}")

    @property
    def shape(self) -> Tuple[int, int]:
        """Grid cells along (x, y)."""
        return round(self.width / self.epsilon), round(self.height / self.epsilon)

    def contains(self, point: Point) -> bool:
        x, y = point
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height


@dataclass(frozen=True)
class GridLocation:
    index: int
    center: Point


@dataclass(frozen=True)
class BeamSectorGeometry:
    """Charger-to-grid geometry for one covered grid and one beam.

    Angles are absolute bearings seen from the charger. ``theta_01``/``theta_02``
    bound the main lobe (first nulls) and ``theta_e1``/``theta_e2`` are the
    directions where the beam power has dropped to ``1/gamma`` of its peak.
    """

    d1: float
    theta1: float
    theta_m: float
    theta_l: float
    theta_r: float
    gamma: float = 2.0
    theta_01: float = float("nan")
    theta_02: float = float("nan")
    theta_e1: float = float("nan")
    theta_e2: float = float("nan")

    @property
    def beam_covered(self) -> bool:
        return self.theta_e1 <= self.theta_l and self.theta_r <= self.theta_e2


def build_grid(area: Area) -> list[GridLocation]:
    """Grid-center stop locations in row-major order (x varies fastest)."""
    nx, ny = area.shape
    eps = area.epsilon
    return [
        GridLocation(r * nx + c, ((c + 0.5) * eps, (r + 0.5) * eps))
        for r in range(ny)
        for c in range(nx)
    ]


def grid_centers(area: Area) -> np.ndarray:
    """(L, 2) array of stop coordinates, same order as :func:`build_grid`."""
    nx, ny = area.shape
    eps = area.epsilon
    cx = (np.arange(nx) + 0.5) * eps
    cy = (np.arange(ny) + 0.5) * eps
    xx, yy = np.meshgrid(cx, cy)
    return np.column_stack([xx.ravel(), yy.ravel()])


def distance(loc, sensor_pos: Sequence[float]) -> float:
    center = loc.center if isinstance(loc, GridLocation) else loc
    return math.hypot(sensor_pos[0] - center[0], sensor_pos[1] - center[1])


def half_diagonal(epsilon: float) -> float:
    return math.sqrt(2.0) * epsilon / 2.0


def ratio_bound(d1: float, epsilon: float, gamma: float) -> float:
    """gamma * (d1 + h)^2 / (d1 - h)^2 with h the grid half-diagonal."""
    if epsilon < 0:
        raise PreconditionError(f"epsilon must be non-negative, got {epsilon}")
    if gamma < 1.0:
        raise PreconditionError(f"gamma is a power ratio and must be >= 1, got {gamma}")
    h = half_diagonal(epsilon)
    if d1 <= h:
        raise PreconditionError(
            f"charger and grid overlap: d1={d1} must exceed the half-diagonal {h:.6g}"
        )
    return gamma * (d1 + h) ** 2 / (d1 - h) ** 2


def discretization_ratio_bound(geom: BeamSectorGeometry, epsilon: float) -> float:
    return ratio_bound(geom.d1, epsilon, geom.gamma)


def min_distance_ok(d_prime: float, epsilon: float, sector: BeamSectorGeometry) -> bool:
    """Minimum charger-sensor distance check for the ratio bound to apply.

    Both sine ratios are taken in absolute value so the check does not depend
    on which side of the beam is labelled 1 or 2.
    """
    h = half_diagonal(epsilon)
    if not d_prime > 0 or sector.d1 <= h:
        return False
    angles = (sector.theta_01, sector.theta_02, sector.theta_e1, sector.theta_e2)
    if not all(math.isfinite(a) for a in angles):
        return False
    bounds = []
    for num, den in (
        (math.pi / 4 - sector.theta_01, sector.theta_e1 - sector.theta_01),
        (math.pi / 4 + sector.theta_02, sector.theta_e2 - sector.theta_02),
    ):
        s = abs(math.sin(den))
        if s < 1e-12:
            return False
        bounds.append(h * abs(math.sin(num)) / s)
    return d_prime > max(bounds)


def bearing(origin: Sequence[float], target: Sequence[float]) -> float:
    """Angle in [0, 2*pi) of the ray origin -> target, from the +x axis."""
    a = math.atan2(target[1] - origin[1], target[0] - origin[0])
    return a % (2 * math.pi)


def grid_corners(center: Sequence[float], epsilon: float) -> np.ndarray:
    cx, cy = center
    e = epsilon / 2
    return np.array([[cx - e, cy - e], [cx + e, cy - e], [cx + e, cy + e], [cx - e, cy + e]])


def corner_bearings(charger: Sequence[float], center: Sequence[float], epsilon: float) -> Tuple[float, float]:
    """Angular extent (theta_l, theta_r) of a grid seen from a charger outside it.

    Bearings are unwrapped around the bearing of the grid center so the pair is
    ordered even when the grid straddles the +x axis.
    """
    ref = bearing(charger, center)
    corners = grid_corners(center, epsilon)
    rel = np.arctan2(corners[:, 1] - charger[1], corners[:, 0] - charger[0]) - ref
    rel = (rel + np.pi) % (2 * np.pi) - np.pi
    return ref + float(rel.min()), ref + float(rel.max())
