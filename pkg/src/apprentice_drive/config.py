"""Run configuration: typed sections and the flat ``key = value`` file format.

Every key is ``<section>.<field>``; sections are ``sim``, ``vehicle``, ``road``,
``features``, ``demos``, ``girl``, ``train`` and ``eval``.  Blank lines and
``#`` comments are ignored.  Sequence values are comma separated.  Unknown
keys and unparsable values raise :class:`ConfigError`.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

G = 9.81
KMH = 1.0 / 3.6


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    max_steps: int = 900
    stop_speed: float = 0.05
    stop_steps: int = 3

    def validate(self) -> None:
        if not self.dt > 0:
            raise ConfigError("sim.dt must be > 0")
        if self.max_steps < 1 or self.stop_steps < 1:
            raise ConfigError("sim.max_steps and sim.stop_steps must be >= 1")
        if not self.stop_speed > 0:
            raise ConfigError("sim.stop_speed must be > 0")


@dataclass(frozen=True)
class VehicleParams:
    mass: float = 1498.0
    max_traction_force: float = 4500.0
    max_brake_force: float = 12000.0
    drag_coeff: float = 0.42
    rolling_resist_force: float = 176.0

    def validate(self) -> None:
        for f in dataclasses.fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"vehicle.{f.name} must be > 0")
        if self.max_brake_force / self.mass <= 0.5 * G:
            raise ConfigError("vehicle.max_brake_force / vehicle.mass must exceed 0.5 g")

    @property
    def top_speed(self) -> float:
        return math.sqrt((self.max_traction_force - self.rolling_resist_force) / self.drag_coeff)


@dataclass(frozen=True)
class RoadConfig:
    length: float = 300.0
    speed_limit: float = 60.0 * KMH
    friction: float = 1.0

    def validate(self) -> None:
        if not self.length > 0:
            raise ConfigError("road.length must be > 0")
        if not self.speed_limit > 0:
            raise ConfigError("road.speed_limit must be > 0")
        if self.friction != 1.0:
            raise ConfigError("road.friction is fixed at 1.0")


@dataclass(frozen=True)
class FeatureConfig:
    # stop-sign Gaussian: mean (stop_mu_v, stop_mu_d), shared width stop_sigma
    stop_mu_v: float = 0.0
    stop_mu_d: float = 2.0
    stop_sigma: float = 6.0
    speed_scale: float = 10.0
    g: float = G
    proximity_scale: float = 30.0
    distance_guard: float = 0.5
    braking_demand_cap: float = 2.0

    def validate(self) -> None:
        if self.stop_mu_v != 0.0:
            raise ConfigError("features.stop_mu_v must be 0")
        for name in ("stop_sigma", "speed_scale", "g", "proximity_scale", "distance_guard"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"features.{name} must be > 0")


@dataclass(frozen=True)
class DemoConfig:
    n_total: int = 150
    n_bad: int = 30
    jitter_std: float = 0.03
    v0_min_kmh: float = 30.0
    v0_max_kmh: float = 70.0
    bad_onset_demand: float = 1.3

    def validate(self) -> None:
        if self.n_total < 1 or not 0 <= self.n_bad <= self.n_total:
            raise ConfigError("demos.n_bad must lie in [0, demos.n_total] and n_total >= 1")
        if not 0 <= self.v0_min_kmh <= self.v0_max_kmh:
            raise ConfigError("demos velocity range is empty")


@dataclass(frozen=True)
class GirlConfig:
    gamma: float = 0.995
    max_iter: int = 100_000
    tol: float = 1e-10

    def validate(self) -> None:
        if not 0 <= self.gamma < 1:
            raise ConfigError("girl.gamma must lie in [0, 1)")


@dataclass(frozen=True)
class TrainConfig:
    algo: str = "ddpg"
    reinforce_gamma: float = 0.995
    ddpg_gamma: float = 0.990
    lr_actor: float = 0.001
    lr_critic: float = 0.0003
    batch_trajectories: int = 50
    iterations: int = 200
    minibatch: int = 64
    episodes: int = 250
    memory_size: int = 10_000
    noise_variance: float = 3.0
    noise_decay: float = 0.999
    tau: float = 0.001
    hidden: int = 64
    initial_velocity: float = 60.0 * KMH
    checkpoint_every: int = 10
    absorbing_tail: bool = True
    omega: tuple[float, ...] = ()

    def validate(self) -> None:
        if self.algo not in ("reinforce", "ddpg"):
            raise ConfigError("train.algo must be 'reinforce' or 'ddpg'")
        for name in ("reinforce_gamma", "ddpg_gamma"):
            if not 0 <= getattr(self, name) < 1:
                raise ConfigError(f"train.{name} must lie in [0, 1)")
        for name in ("lr_actor", "lr_critic", "tau", "noise_variance", "noise_decay"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"train.{name} must be > 0")
        if self.tau > 1:
            raise ConfigError("train.tau must lie in [0, 1]")
        if self.minibatch < 1 or self.memory_size < self.minibatch:
            raise ConfigError("train.memory_size must be >= train.minibatch >= 1")
        if self.episodes < 0 or self.iterations < 0 or self.batch_trajectories < 1:
            raise ConfigError("train episode/iteration counts must be non-negative")
        if self.omega and len(self.omega) != 3:
            raise ConfigError("train.omega needs exactly 3 weights")

    @property
    def gamma(self) -> float:
        return self.reinforce_gamma if self.algo == "reinforce" else self.ddpg_gamma


@dataclass(frozen=True)
class EvalConfig:
    n_episodes: int = 40
    v0_min_kmh: float = 30.0
    v0_max_kmh: float = 70.0
    road_lengths: tuple[float, ...] = (200.0, 300.0, 400.0, 500.0)
    settle_time: float = 3.0
    stop_gap_max: float = 5.0
    speed_excess_max: float = 1.0
    accel_max: float = 0.5 * G

    def validate(self) -> None:
        if self.n_episodes < 1:
            raise ConfigError("eval.n_episodes must be >= 1")
        if not 0 <= self.v0_min_kmh <= self.v0_max_kmh <= 110:
            raise ConfigError("eval velocity range must lie within [0, 110] km/h")
        if not self.road_lengths or any(not x > 50 for x in self.road_lengths):
            raise ConfigError("eval.road_lengths must be non-empty and all > 50 m")


SECTIONS = {
    "sim": SimConfig,
    "vehicle": VehicleParams,
    "road": RoadConfig,
    "features": FeatureConfig,
    "demos": DemoConfig,
    "girl": GirlConfig,
    "train": TrainConfig,
    "eval": EvalConfig,
}


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig = field(default_factory=SimConfig)
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    road: RoadConfig = field(default_factory=RoadConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    demos: DemoConfig = field(default_factory=DemoConfig)
    girl: GirlConfig = field(default_factory=GirlConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self) -> RunConfig:
        for name in SECTIONS:
            getattr(self, name).validate()
        return self

    def replace(self, **overrides: Any) -> RunConfig:
        """Return a copy with ``section.field`` overrides applied."""
        sections: dict[str, dict[str, Any]] = {}
        for key, value in overrides.items():
            section, name = _split_key(key)
            sections.setdefault(section, {})[name] = value
        return dataclasses.replace(
            self,
            **{s: dataclasses.replace(getattr(self, s), **kv) for s, kv in sections.items()},
        ).validate()


def _split_key(key: str) -> tuple[str, str]:
    section, _, name = key.partition(".")
    cls = SECTIONS.get(section)
    if cls is None or name not in {f.name for f in dataclasses.fields(cls)}:
        raise ConfigError(f"unknown configuration key: {key!r}")
    return section, name


def _parse_value(raw: str, default: Any, key: str) -> Any:
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            lowered = raw.lower()
            if lowered in ("true", "1", "yes"):
                return True
            if lowered in ("false", "0", "no"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError(raw)
            return value
        if isinstance(default, tuple):
            return tuple(float(x) for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, base: RunConfig | None = None) -> RunConfig:
    base = base or RunConfig()
    overrides: dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key = key.strip()
        section, name = _split_key(key)
        default = getattr(getattr(base, section), name)
        overrides[key] = _parse_value(raw, default, key)
    try:
        return base.replace(**overrides)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig().validate()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(repr(float(x)) for x in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(config: RunConfig) -> str:
    """Render every key, so the output parses back to an equal config."""
    lines = []
    for section in SECTIONS:
        obj = getattr(config, section)
        for f in dataclasses.fields(obj):
            lines.append(f"{section}.{f.name} = {_format_value(getattr(obj, f.name))}")
    return "\n".join(lines) + "\n"
