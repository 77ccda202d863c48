"""TOML configuration: track spec, sensor, walker, reward weights, observation scales."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .geometry import ContractError, SensorMount
from .lidar import ScanPattern, SensorNoise
from .obsact import ObsScales
from .reward import RewardWeights
from .sim import SimConfig, WalkerConfig
from .terrain import ConfigError, TrackSpec

SECTIONS = ("track", "sensor", "walker", "reward", "observation")
SENSOR_KEYS = ("azimuth_count", "elevation_min_deg", "elevation_max_deg", "rings", "max_range",
               "point_noise", "dropout", "mount_offset", "mount_inverted")


@dataclass
class Config:
    track: TrackSpec = field(default_factory=TrackSpec)
    sim: SimConfig = field(default_factory=SimConfig)


def _sensor(d: dict, base: SimConfig) -> SimConfig:
    extra = set(d) - set(SENSOR_KEYS)
    if extra:
        raise ConfigError(f"unknown sensor keys: {sorted(extra)}")
    el = base.pattern.elevation_angles
    pattern = ScanPattern.uniform(
        int(d.get("azimuth_count", base.pattern.azimuth_count)),
        float(d.get("elevation_min_deg", math.degrees(el[0]))),
        float(d.get("elevation_max_deg", math.degrees(el[-1]))),
        int(d.get("rings", len(el))),
        float(d.get("max_range", base.pattern.max_range)),
    )
    noise = SensorNoise(float(d.get("point_noise", base.noise.point_noise)),
                        float(d.get("dropout", base.noise.dropout)))
    mount = SensorMount(tuple(d.get("mount_offset", base.mount.offset)),
                        bool(d.get("mount_inverted", base.mount.inverted)))
    return replace(base, pattern=pattern, noise=noise, mount=mount)


def parse_config(doc: dict) -> Config:
    extra = set(doc) - set(SECTIONS)
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    try:
        track = TrackSpec.from_dict(doc.get("track", {}))
        sim = SimConfig()
        if "sensor" in doc:
            sim = _sensor(doc["sensor"], sim)
        if "walker" in doc:
            w = doc["walker"]
            extra = set(w) - set(WalkerConfig.__dataclass_fields__)
            if extra:
                raise ConfigError(f"unknown walker keys: {sorted(extra)}")
            sim = replace(sim, walker=WalkerConfig(**w))
        if "reward" in doc:
            sim = replace(sim, weights=RewardWeights.from_dict(doc["reward"]))
        if "observation" in doc:
            sim = replace(sim, scales=ObsScales.from_dict(doc["observation"]))
    except (TypeError, ContractError) as exc:
        raise ConfigError(str(exc)) from exc
    return Config(track, sim)


def load_config(path) -> Config:
    p = Path(path)
    try:
        doc = tomllib.loads(p.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {p} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from None
    return parse_config(doc)


def default_config_path() -> Path:
    return Path(__file__).parent / "data" / "default.toml"
