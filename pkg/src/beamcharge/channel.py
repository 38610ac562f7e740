"""ULA beamforming, codebooks, CSI sampling and received power.

Phase convention: element ``n`` of a steering codeword aimed at ``theta`` is
``exp(-1j * 2*pi * n * (spacing/lambda) * cos(theta)) / sqrt(N_a)`` and the
channel toward a sensor at bearing ``theta`` carries the conjugate phases, so
a matched pair has a real positive inner product.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConfigError, DegenerateGeometryError, DimensionError
from .geometry import BeamSectorGeometry, GridLocation, bearing, corner_bearings

SPEED_OF_LIGHT = 299_792_458.0

# gains never drift below this fraction of their initial value
GAIN_FLOOR_FRACTION = 0.01


@dataclass(frozen=True)
class UlaConfig:
    n_antennas: int = 8
    spacing: float = 0.1
    carrier_frequency: float = 800e6

    def __post_init__(self):
        if self.n_antennas < 1:
            raise ConfigError("a ULA needs at least one antenna")
        if not (self.spacing > 0 and self.carrier_frequency > 0):
            raise ConfigError("ULA spacing and carrier frequency must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def phase_step(self) -> float:
        """2*pi*spacing/lambda, the inter-element phase per unit cos(theta)."""
        return 2 * math.pi * self.spacing / self.wavelength


@dataclass(frozen=True)
class Codeword:
    weights: np.ndarray
    beam_angle: float

    def __post_init__(self):
        norm = float(np.linalg.norm(self.weights))
        if abs(norm - 1.0) > 1e-12:
            raise ConfigError(f"codeword weights must have unit norm, got {norm!r}")


@dataclass(frozen=True)
class Codebook:
    entries: Tuple[Codeword, ...]

    def __post_init__(self):
        if not self.entries:
            raise ConfigError("codebook must hold at least one codeword")
        angles = [c.beam_angle for c in self.entries]
        if any(b <= a for a, b in zip(angles, angles[1:])):
            raise ConfigError("codebook beam angles must be strictly increasing")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, k) -> Codeword:
        return self.entries[k]

    @property
    def angles(self) -> np.ndarray:
        return np.array([c.beam_angle for c in self.entries])

    @property
    def weights(self) -> np.ndarray:
        """(M, N_a) weight matrix."""
        return np.stack([c.weights for c in self.entries])


@dataclass(frozen=True)
class ChannelDraw:
    mean_vector: np.ndarray
    fade: complex
    realized: np.ndarray


@dataclass(frozen=True)
class AntennaGainState:
    initial: np.ndarray
    current: np.ndarray
    drift_rate: float = 0.05

    @classmethod
    def fresh(cls, initial, drift_rate: float = 0.05) -> "AntennaGainState":
        initial = np.asarray(initial, dtype=float)
        if np.any(initial <= 0):
            raise ConfigError("antenna gains must be positive")
        return cls(initial, initial.copy(), drift_rate)


def steering_vector(theta, ula: UlaConfig) -> np.ndarray:
    """Unit-modulus array response toward bearing(s) ``theta``; shape (..., N_a)."""
    n = np.arange(ula.n_antennas)
    theta = np.asarray(theta, dtype=float)
    return np.exp(1j * ula.phase_step * np.cos(theta)[..., None] * n)


def steering_codeword(theta_m: float, ula: UlaConfig) -> Codeword:
    n = np.arange(ula.n_antennas)
    w = np.exp(-1j * ula.phase_step * n * math.cos(theta_m)) / math.sqrt(ula.n_antennas)
    return Codeword(w, float(theta_m))


def build_codebook(m_size: int, ula: UlaConfig) -> Codebook:
    """``m_size`` beams spaced uniformly over [0, pi)."""
    if m_size < 1:
        raise ConfigError("codebook size must be >= 1")
    return Codebook(tuple(steering_codeword(k * math.pi / m_size, ula) for k in range(m_size)))


def _center(loc) -> Tuple[float, float]:
    return loc.center if isinstance(loc, GridLocation) else (float(loc[0]), float(loc[1]))


def mean_channel(sensor_pos: Sequence[float], gain: float, loc, ula: UlaConfig) -> np.ndarray:
    c = _center(loc)
    d = math.hypot(sensor_pos[0] - c[0], sensor_pos[1] - c[1])
    if d == 0.0:
        raise DegenerateGeometryError(f"sensor at {tuple(sensor_pos)} coincides with the charger")
    return (gain / d) * steering_vector(bearing(c, sensor_pos), ula)


def sample_fade(rng: np.random.Generator, size=None):
    """Circularly-symmetric complex Gaussian with E|g|^2 = 1."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re + 1j * im) / math.sqrt(2.0)


def sample_csi(mean: np.ndarray, rng: np.random.Generator) -> ChannelDraw:
    g = complex(sample_fade(rng))
    mean = np.asarray(mean, dtype=complex)
    return ChannelDraw(mean, g, g * mean)


def _weights(w: Union[Codeword, np.ndarray]) -> np.ndarray:
    return w.weights if isinstance(w, Codeword) else np.asarray(w)


def received_power(h: np.ndarray, w: Union[Codeword, np.ndarray]) -> float:
    h = np.asarray(h)
    wv = _weights(w)
    if h.shape != wv.shape:
        raise DimensionError(f"channel length {h.shape} does not match codeword {wv.shape}")
    return float(abs(np.dot(h, wv)) ** 2)


def superposed_power(contributions: Iterable[Tuple[np.ndarray, Union[Codeword, np.ndarray]]]) -> float:
    """|sum_c h_c^T w_c|^2: fields from several chargers add before squaring."""
    total = 0j
    count = 0
    for h, w in contributions:
        h = np.asarray(h)
        wv = _weights(w)
        if h.shape != wv.shape:
            raise DimensionError(f"channel length {h.shape} does not match codeword {wv.shape}")
        total += np.dot(h, wv)
        count += 1
    if count == 0:
        raise ValueError("superposed_power needs at least one contribution")
    return float(abs(total) ** 2)


def expected_power(sensor_pos, gain: float, loc, codeword: Codeword, ula: UlaConfig) -> float:
    # scalar fade with E|g|^2 = 1 leaves the mean power unchanged
    return received_power(mean_channel(sensor_pos, gain, loc, ula), codeword)


def array_factor(theta, weights: np.ndarray, ula: UlaConfig) -> np.ndarray:
    """|a(theta)^T w|^2 for a unit-gain channel; broadcasts theta against rows of ``weights``."""
    a = steering_vector(theta, ula)
    return np.abs(a @ np.asarray(weights).T) ** 2


def policy_geometry(sensor_positions, centers, codebook: Codebook, ula: UlaConfig):
    """Per-policy, per-sensor array factor and squared distance.

    Policy ``j = l * M + m`` pairs stop ``l`` with codeword ``m``. Returns
    ``(af, dist2)`` with shapes (L*M, N) and (L, N).
    """
    sensors = np.asarray(sensor_positions, dtype=float).reshape(-1, 2)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    dx = sensors[None, :, 0] - centers[:, None, 0]
    dy = sensors[None, :, 1] - centers[:, None, 1]
    dist2 = dx * dx + dy * dy
    if np.any(dist2 == 0.0):
        raise DegenerateGeometryError("a sensor sits exactly on a charger stop")
    theta = np.arctan2(dy, dx)
    af = array_factor(theta, codebook.weights, ula)  # (L, N, M)
    af = np.transpose(af, (0, 2, 1)).reshape(-1, sensors.shape[0])
    return af, dist2


def power_matrix(sensor_positions, gains, centers, codebook: Codebook, ula: UlaConfig) -> np.ndarray:
    """Deterministic (no-fade) received power, shape (L*M, N)."""
    af, dist2 = policy_geometry(sensor_positions, centers, codebook, ula)
    m = len(codebook)
    gains = np.asarray(gains, dtype=float)
    return af * (gains ** 2)[None, :] / np.repeat(dist2, m, axis=0)


def reference_power(ula: UlaConfig, max_gain: float, reference_distance: float) -> float:
    """N_a * A_max^2 / d_min^2: matched-beam power at the reference distance."""
    if max_gain <= 0 or reference_distance <= 0:
        raise ConfigError("reference power needs a positive gain and distance")
    return ula.n_antennas * max_gain ** 2 / reference_distance ** 2


def normalize_power(p, p_ref: float):
    if not p_ref > 0:
        raise ConfigError(f"reference power must be positive, got {p_ref}")
    out = np.minimum(np.asarray(p, dtype=float) / p_ref, 1.0)
    return float(out) if out.ndim == 0 else out


def expected_normalized_power(p, p_ref: float):
    """E[min(|g|^2 p / p_ref, 1)] for |g|^2 ~ Exp(1), i.e. a * (1 - exp(-1/a))."""
    if not p_ref > 0:
        raise ConfigError(f"reference power must be positive, got {p_ref}")
    a = np.asarray(p, dtype=float) / p_ref
    with np.errstate(divide="ignore"):
        out = np.where(a > 0, -a * np.expm1(-1.0 / np.where(a > 0, a, 1.0)), 0.0)
    return float(out) if out.ndim == 0 else out


def drift_antenna_gain(state: AntennaGainState, rng: np.random.Generator) -> AntennaGainState:
    if state.drift_rate == 0:
        return state
    step = rng.uniform(-state.drift_rate, state.drift_rate, size=state.initial.shape) * state.initial
    current = np.maximum(state.current + step, GAIN_FLOOR_FRACTION * state.initial)
    return replace(state, current=current)


# --- main-lobe geometry ------------------------------------------------------

def _nearest_image(theta_m: float, theta: float) -> float:
    """Beam direction (theta_m or its mirror -theta_m) closest to ``theta``, unwrapped near it."""
    best = None
    for img in (theta_m, -theta_m):
        diff = (theta - img + math.pi) % (2 * math.pi) - math.pi
        if best is None or abs(diff) < abs(best[0]):
            best = (diff, theta - diff)
    return best[1]


def _lobe_crossing(f, center: float, direction: int, level: float, step: float = 1e-3) -> float:
    """First angle from ``center`` (stepping by ``direction``) where f drops to ``level``."""
    prev = center
    for k in range(1, int(math.pi / step) + 2):
        th = center + direction * k * step
        if f(th) <= level:
            return brentq(lambda t: f(t) - level, min(prev, th), max(prev, th), xtol=1e-13)
        prev = th
    return center + direction * math.pi


def _first_null(f, center: float, direction: int, step: float = 1e-3) -> float:
    prev_val = f(center)
    for k in range(1, int(math.pi / step) + 2):
        th = center + direction * k * step
        val = f(th)
        if val > prev_val:
            lo, hi = sorted((center + direction * (k - 2) * step, th))
            res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            return float(res.x)
        prev_val = val
    return center + direction * math.pi


def beam_sector(
    charger: Sequence[float],
    grid_center: Sequence[float],
    epsilon: float,
    codeword: Codeword,
    ula: UlaConfig,
    gamma: Optional[float] = None,
) -> BeamSectorGeometry:
    """Sector geometry of a grid seen from ``charger`` under ``codeword``.

    With ``gamma=None`` the realized in-grid angular power ratio is used.
    """
    w = codeword.weights
    f = lambda th: float(array_factor(th, w[None, :], ula)[0])
    d1 = math.hypot(grid_center[0] - charger[0], grid_center[1] - charger[1])
    theta1 = bearing(charger, grid_center)
    theta_l, theta_r = corner_bearings(charger, grid_center, epsilon)
    theta_m = _nearest_image(codeword.beam_angle, theta1)
    if gamma is None:
        gamma = realized_angular_ratio(theta_l, theta_r, theta_m, f)
    peak = f(theta_m)
    return BeamSectorGeometry(
        d1=d1,
        theta1=theta1,
        theta_m=theta_m,
        theta_l=theta_l,
        theta_r=theta_r,
        gamma=gamma,
        theta_01=_first_null(f, theta_m, -1),
        theta_02=_first_null(f, theta_m, +1),
        theta_e1=_lobe_crossing(f, theta_m, -1, peak / gamma),
        theta_e2=_lobe_crossing(f, theta_m, +1, peak / gamma),
    )


def realized_angular_ratio(theta_l: float, theta_r: float, theta_m: float, f) -> float:
    """max/min of the beam pattern over [theta_l, theta_r] (single-lobe span assumed)."""
    peak = f(min(max(theta_m, theta_l), theta_r))
    low = min(f(theta_l), f(theta_r))
    return peak / low


def in_grid_power_ratio(
    charger: Sequence[float],
    grid_center: Sequence[float],
    epsilon: float,
    codeword: Codeword,
    ula: UlaConfig,
    samples: int = 50,
) -> float:
    """max/min deterministic power over a samples x samples lattice covering the grid."""
    off = np.linspace(-epsilon / 2, epsilon / 2, samples)
    xx, yy = np.meshgrid(grid_center[0] + off, grid_center[1] + off)
    dx = xx.ravel() - charger[0]
    dy = yy.ravel() - charger[1]
    p = array_factor(np.arctan2(dy, dx), codeword.weights[None, :], ula)[:, 0] / (dx * dx + dy * dy)
    return float(p.max() / p.min())


def power_field(charger: Sequence[float], codeword: Codeword, ula: UlaConfig, xs, ys, gain: float = 1.0) -> np.ndarray:
    """Deterministic power on the raster xs x ys (rows follow ys); NaN where d = 0."""
    xx, yy = np.meshgrid(np.asarray(xs, float), np.asarray(ys, float))
    dx = xx - charger[0]
    dy = yy - charger[1]
    d2 = dx * dx + dy * dy
    af = array_factor(np.arctan2(dy, dx), codeword.weights[None, :], ula)[..., 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(d2 > 0, gain ** 2 * af / d2, np.nan)
