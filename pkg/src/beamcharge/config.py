"""Scenario configuration: YAML in, validated dataclass out."""
from __future__ import annotations

import hashlib
import math
import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import yaml

from .energy import check_deadline
from .errors import ConfigError

ALGORITHMS = ("umcb", "umcb_sw", "eg", "gua", "gmq")


@dataclass(frozen=True)
class ScenarioConfig:
    width: float = 5.0
    height: float = 5.0
    epsilon: float = 1.0
    n_antennas: int = 8
    antenna_spacing: float = 0.1
    frequency: float = 800e6
    codebook_size: int = 4
    n_sensors: int = 5
    sensor_positions: Optional[Tuple[Tuple[float, float], ...]] = None
    sensor_gain: float = 1.0
    reference_distance: float = 1.0
    capacity: float = 500.0
    zeta: float = 2.0
    deadline: float = 1000.0
    slot_duration: float = 20.0
    n_slots: int = 50
    rounds: int = 2000
    eta: float = 1.0
    scenario: str = "stationary"
    drift_rate: float = 0.05
    utility: str = "U1"
    utility_table: Optional[Tuple[float, ...]] = None
    algorithms: Tuple[str, ...] = ("umcb", "gua")
    seed: Optional[int] = None
    window: Union[str, int] = "auto"
    share_by_location: bool = True
    epsilon0: float = 1.0 / 3.0
    alpha: float = 0.5 - 0.5 / math.e
    out_dir: str = "runs/out"
    write_energy_trace: bool = False

    def __post_init__(self):
        if self.seed is None:
            raise ConfigError("a seed is required; runs never draw implicit entropy")
        positives = ("width", "height", "epsilon", "n_antennas", "antenna_spacing", "frequency",
                     "codebook_size", "n_sensors", "sensor_gain", "reference_distance", "capacity",
                     "deadline", "slot_duration", "n_slots", "eta")
        for name in positives:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.rounds < 0:
            raise ConfigError("rounds must be non-negative")
        if self.zeta < 1:
            raise ConfigError(f"zeta must be >= 1, got {self.zeta}")
        check_deadline(self.n_slots, self.slot_duration, self.deadline)
        if self.scenario not in ("stationary", "nonstationary"):
            raise ConfigError(f"unknown scenario kind {self.scenario!r}")
        if not 0 <= self.drift_rate:
            raise ConfigError("drift_rate must be non-negative")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad or not self.algorithms:
            raise ConfigError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if not (self.window == "auto" or (isinstance(self.window, int) and self.window >= 1)):
            raise ConfigError(f"window must be 'auto' or a positive integer, got {self.window!r}")
        if not 0 <= self.epsilon0 <= 1:
            raise ConfigError("epsilon0 must lie in [0, 1]")
        if self.sensor_positions is not None:
            pos = tuple(tuple(float(v) for v in p) for p in self.sensor_positions)
            if len(pos) != self.n_sensors or any(len(p) != 2 for p in pos):
                raise ConfigError("sensor_positions must list n_sensors (x, y) pairs")
            object.__setattr__(self, "sensor_positions", pos)
        if self.utility_table is not None:
            object.__setattr__(self, "utility_table", tuple(float(v) for v in self.utility_table))
        object.__setattr__(self, "algorithms", tuple(self.algorithms))

    def override(self, **changes) -> "ScenarioConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = json.loads(json.dumps(v))
        return d

    def digest(self) -> str:
        """Hash of everything that affects results (output location excluded)."""
        d = self.to_dict()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _flatten(raw: dict) -> dict:
    # nested sections are accepted for readability and merged into the flat keys
    flat = {}
    for key, value in raw.items():
        if isinstance(value, dict) and key in ("area", "ula", "round", "bandit", "sensors", "output"):
            flat.update(value)
        else:
            flat[key] = value
    return flat


def load_config(path, **overrides) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping of keys to values")
    return config_from_dict(raw, **overrides)


def config_from_dict(raw: dict, **overrides) -> ScenarioConfig:
    flat = _flatten(raw)
    flat.update({k: v for k, v in overrides.items() if v is not None})
    known = set(ScenarioConfig.__dataclass_fields__)
    unknown = sorted(set(flat) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {unknown}")
    for key in ("algorithms", "sensor_positions", "utility_table"):
        if isinstance(flat.get(key), list):
            flat[key] = tuple(tuple(v) if isinstance(v, list) else v for v in flat[key])
    try:
        return ScenarioConfig(**flat)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def dump_config(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True)


def default_algorithms() -> List[str]:
    return list(ALGORITHMS)
