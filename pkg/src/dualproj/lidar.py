"""Synthetic spinning-LiDAR scans and the sensor corruption model."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .geometry import ContractError, DomainError, PointCloud, Pose, Scene, SensorMount, cast_rays


@dataclass(frozen=True)
class ScanPattern:
    azimuth_count: int = 360
    elevation_angles: tuple = tuple(np.linspace(math.radians(-7.0), math.radians(52.0), 40).tolist())
    max_range: float = 20.0

    def __post_init__(self):
        if int(self.azimuth_count) < 1:
            raise ContractError("azimuth_count must be >= 1")
        el = tuple(float(e) for e in self.elevation_angles)
        if not el or any(b <= a for a, b in zip(el, el[1:])):
            raise ContractError("elevation angles must be non-empty and strictly increasing")
        if not self.max_range > 0:
            raise ContractError("max_range must be positive")
        object.__setattr__(self, "azimuth_count", int(self.azimuth_count))
        object.__setattr__(self, "elevation_angles", el)

    @classmethod
    def uniform(cls, azimuth_count: int, elev_lo_deg: float, elev_hi_deg: float, rings: int,
                max_range: float) -> "ScanPattern":
        el = np.linspace(math.radians(elev_lo_deg), math.radians(elev_hi_deg), rings)
        return cls(azimuth_count, tuple(el.tolist()), max_range)

    def directions(self) -> np.ndarray:
        """Unit ray directions in the sensor frame, azimuth-major."""
        az = np.arange(self.azimuth_count) * (2.0 * math.pi / self.azimuth_count)
        el = np.asarray(self.elevation_angles)
        a, e = np.meshgrid(az, el, indexing="ij")
        d = np.stack([np.cos(e) * np.cos(a), np.cos(e) * np.sin(a), np.sin(e)], axis=-1).reshape(-1, 3)
        return d / np.sqrt((d * d).sum(axis=1))[:, None]


@dataclass(frozen=True)
class SensorNoise:
    point_noise: float = 0.05
    dropout: float = 0.10

    def __post_init__(self):
        if not self.point_noise >= 0:
            raise ContractError("point_noise must be >= 0")
        if not 0.0 <= self.dropout <= 1.0:
            raise ContractError("dropout must lie in [0, 1]")


def scan(scene: Scene, pose: Pose, pattern: ScanPattern, mount: SensorMount = SensorMount(),
         backend: Optional[str] = None, _dirs: Optional[np.ndarray] = None) -> PointCloud:
    """Cast every ray of ``pattern`` from the sensor on a base at ``pose``.

    Returns hits in the sensor frame; misses are dropped and the rest keep
    azimuth-major order.
    """
    origin = pose.to_world(np.asarray(mount.offset, dtype=float)[None])[0]
    hf = scene.heightfield
    if hf is not None and not hf.contains(origin[0], origin[1]):
        raise DomainError(f"sensor at {tuple(origin[:2])} lies outside the track footprint")
    d_sensor = pattern.directions() if _dirs is None else _dirs
    d_world = d_sensor @ (pose.rotation() @ mount.rotation()).T
    origins = np.broadcast_to(origin, d_world.shape)
    t = cast_rays(scene, origins, d_world, pattern.max_range, backend=backend)
    hit = np.isfinite(t)
    return PointCloud(d_sensor[hit] * t[hit, None], "sensor")


def corrupt(cloud: PointCloud, noise: SensorNoise, rng: np.random.Generator) -> PointCloud:
    """Drop exactly floor(dropout * N) random points, then jitter each axis uniformly."""
    pts = cloud.points
    n = len(pts)
    k = int(math.floor(noise.dropout * n))
    if k:
        keep = np.ones(n, dtype=bool)
        keep[rng.choice(n, size=k, replace=False)] = False
        pts = pts[keep]
    if noise.point_noise > 0 and len(pts):
        a = noise.point_noise
        pts = pts + rng.uniform(-a, a, size=pts.shape)
    else:
        pts = pts.copy()
    return PointCloud(pts, cloud.frame)

