"""Frames, point sets, heightfields, box primitives and ray casting."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _backend

FRAMES = ("sensor", "base", "world")
MAGIC = b"DPPC"

# heightfield march parameters
MARCH_STRIDE_FRACTION = 0.25
BISECT_TOL = 1e-4
UNIT_TOL = 1e-9


class ContractError(ValueError):
    """An argument violates an operation's preconditions."""


class DomainError(ValueError):
    """A query falls outside the domain an object is defined on."""


def wrap_angle(a: float) -> float:
    """Map an angle onto [-pi, pi)."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w < 0.0:
        w += 2.0 * math.pi
    w -= math.pi
    # fmod rounding can land exactly on +pi
    return -math.pi if w >= math.pi else w


@dataclass(frozen=True)
class Pose:
    """Gravity-aligned, yaw-only pose of a frame in the world."""

    position: tuple = (0.0, 0.0, 0.0)
    yaw: float = 0.0

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(math.isfinite(v) for v in pos):
            raise ContractError(f"pose position must be 3 finite values, got {self.position!r}")
        if not math.isfinite(self.yaw):
            raise ContractError("pose yaw must be finite")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def to_world(self, pts: np.ndarray) -> np.ndarray:
        return pts @ self.rotation().T + np.asarray(self.position)

    def from_world(self, pts: np.ndarray) -> np.ndarray:
        return (pts - np.asarray(self.position)) @ self.rotation()


@dataclass(frozen=True)
class SensorMount:
    """Sensor placement on the base: offset in the base frame, optionally upside down.

    An inverted mount is a 180 degree roll about the base x axis, which is how
    dome LiDARs are commonly hung from a humanoid head to look at the ground.
    """

    offset: tuple = (0.0, 0.0, 0.45)
    inverted: bool = True

    def rotation(self) -> np.ndarray:
        if self.inverted:
            return np.diag([1.0, -1.0, -1.0])
        return np.eye(3)


class PointCloud:
    """An (N, 3) float64 array of points with a frame tag."""

    __slots__ = ("points", "frame")

    def __init__(self, points, frame: str = "base"):
        if frame not in FRAMES:
            raise ContractError(f"unknown frame {frame!r}; expected one of {FRAMES}")
        pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        if not np.isfinite(pts).all():
            raise ContractError("point cloud contains non-finite coordinates")
        self.points = pts
        self.frame = frame

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"PointCloud(n={len(self)}, frame={self.frame!r})"

    def __eq__(self, other):
        if not isinstance(other, PointCloud):
            return NotImplemented
        return self.frame == other.frame and np.array_equal(self.points, other.points)

    def _expect(self, frame):
        if self.frame != frame:
            raise ContractError(f"expected a {frame}-frame cloud, got {self.frame!r}")

    def sensor_to_base(self, mount: SensorMount) -> "PointCloud":
        self._expect("sensor")
        pts = self.points @ mount.rotation().T + np.asarray(mount.offset, dtype=float)
        return PointCloud(pts, "base")

    def base_to_sensor(self, mount: SensorMount) -> "PointCloud":
        self._expect("base")
        pts = (self.points - np.asarray(mount.offset, dtype=float)) @ mount.rotation()
        return PointCloud(pts, "sensor")

    def base_to_world(self, pose: Pose) -> "PointCloud":
        self._expect("base")
        return PointCloud(pose.to_world(self.points), "world")

    def world_to_base(self, pose: Pose) -> "PointCloud":
        self._expect("world")
        return PointCloud(pose.from_world(self.points), "base")


@dataclass
class HeightField:
    """Heights sampled on grid vertices ``origin + (i, j) * cell``; axis 0 is x."""

    origin: tuple
    cell: float
    heights: np.ndarray

    def __post_init__(self):
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        self.cell = float(self.cell)
        if not self.cell > 0:
            raise ContractError("heightfield cell must be positive")
        h = np.ascontiguousarray(np.asarray(self.heights, dtype=np.float64))
        if h.ndim != 2 or h.shape[0] < 2 or h.shape[1] < 2:
            raise ContractError(f"heightfield grid must be 2D with at least 2x2 vertices, got {h.shape}")
        self.heights = h

    @property
    def extent(self):
        """(x_min, x_max, y_min, y_max) of the footprint."""
        nx, ny = self.heights.shape
        ox, oy = self.origin
        return ox, ox + (nx - 1) * self.cell, oy, oy + (ny - 1) * self.cell

    def contains(self, x: float, y: float) -> bool:
        x0, x1, y0, y1 = self.extent
        return x0 <= x <= x1 and y0 <= y <= y1

    def sample(self, x: float, y: float) -> float:
        return heightfield_sample(self, x, y)

    def __eq__(self, other):
        if not isinstance(other, HeightField):
            return NotImplemented
        return (self.origin == other.origin and self.cell == other.cell
                and np.array_equal(self.heights, other.heights))


def heightfield_sample(hf: HeightField, x: float, y: float) -> float:
    """Bilinear height at (x, y); raises DomainError off the footprint."""
    if not hf.contains(x, y):
        x0, x1, y0, y1 = hf.extent
        raise DomainError(f"({x}, {y}) outside heightfield footprint [{x0}, {x1}] x [{y0}, {y1}]")
    h = hf.heights
    nx, ny = h.shape
    u = (x - hf.origin[0]) / hf.cell
    v = (y - hf.origin[1]) / hf.cell
    i = min(int(u), nx - 2)
    j = min(int(v), ny - 2)
    fu = u - i
    fv = v - j
    return float((1.0 - fu) * (1.0 - fv) * h[i, j] + fu * (1.0 - fv) * h[i + 1, j]
                 + (1.0 - fu) * fv * h[i, j + 1] + fu * fv * h[i + 1, j + 1])


@dataclass(frozen=True)
class BoxObstacle:
    """Axis-aligned box. ``kind`` names the terrain archetype it belongs to."""

    center: tuple
    half_extents: tuple
    kind: str = "box"

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        he = tuple(float(v) for v in self.half_extents)
        if len(c) != 3 or len(he) != 3:
            raise ContractError("box center and half_extents must be 3-vectors")
        if not all(v > 0 for v in he):
            raise ContractError(f"box half_extents must be positive, got {he}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "half_extents", he)

    @property
    def lo(self):
        return tuple(c - h for c, h in zip(self.center, self.half_extents))

    @property
    def hi(self):
        return tuple(c + h for c, h in zip(self.center, self.half_extents))


@dataclass
class Scene:
    """What rays can hit: an optional heightfield plus boxes."""

    heightfield: Optional[HeightField] = None
    boxes: Sequence[BoxObstacle] = field(default_factory=tuple)

    def __post_init__(self):
        self.boxes = tuple(self.boxes)
        if self.boxes:
            self._lo = np.ascontiguousarray([b.lo for b in self.boxes], dtype=np.float64)
            self._hi = np.ascontiguousarray([b.hi for b in self.boxes], dtype=np.float64)
        else:
            self._lo = self._hi = np.zeros((0, 3))


def cast_rays(scene: Scene, origins, dirs, max_range: float, backend: Optional[str] = None) -> np.ndarray:
    """Batched ray cast. Returns ranges with ``inf`` for misses.

    Boxes use the exact slab test. The heightfield is marched at a quarter
    cell and the first crossing is bisected down to ``BISECT_TOL``.
    """
    if not max_range > 0 or not math.isfinite(max_range):
        raise ContractError("max_range must be positive and finite")
    o = np.ascontiguousarray(np.asarray(origins, dtype=np.float64).reshape(-1, 3))
    d = np.ascontiguousarray(np.asarray(dirs, dtype=np.float64).reshape(-1, 3))
    if o.shape != d.shape:
        raise ContractError("origins and dirs must have the same shape")
    norms = np.sqrt((d * d).sum(axis=1))
    if len(d) and np.abs(norms - 1.0).max() > UNIT_TOL:
        raise ContractError("ray directions must be unit vectors")
    k = _backend.get(backend)
    out = np.full(len(o), np.inf)
    if len(scene.boxes):
        out = np.minimum(out, k.cast_boxes(scene._lo, scene._hi, o, d, float(max_range)))
    hf = scene.heightfield
    if hf is not None:
        h = hf.heights
        out = np.minimum(out, k.march_heightfield(
            h, hf.origin[0], hf.origin[1], hf.cell, float(h.min()), float(h.max()),
            o, d, float(max_range), hf.cell * MARCH_STRIDE_FRACTION, BISECT_TOL))
    return out


def ray_cast(scene: Scene, origin, direction, max_range: float):
    """Nearest hit of one ray as ``(hit_point, range)``, or None."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    if abs(float(np.linalg.norm(d)) - 1.0) > UNIT_TOL:
        raise ContractError(f"direction {direction!r} is not a unit vector")
    t = float(cast_rays(scene, o[None], d[None], max_range)[0])
    if not math.isfinite(t):
        return None
    return o + t * d, t


# -- point cloud files -------------------------------------------------------

def write_cloud(path, cloud: PointCloud) -> None:
    """Write CSV (``x,y,z`` header) or DPPC binary, chosen by file extension."""
    path = Path(path)
    pts = cloud.points
    if path.suffix.lower() == ".csv":
        with open(path, "w", newline="") as fh:
            fh.write("x,y,z\n")
            for x, y, z in pts.tolist():
                fh.write(f"{x!r},{y!r},{z!r}\n")
    else:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<I", len(pts)))
            fh.write(pts.astype("<f4").tobytes())


def read_cloud(path, frame: str = "base") -> PointCloud:
    """Read either point cloud format; the files carry no frame, so pass it."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == MAGIC:
        raw = path.read_bytes()
        (n,) = struct.unpack_from("<I", raw, 4)
        body = raw[8:]
        if len(body) != n * 12:
            raise ValueError(f"{path}: expected {n * 12} payload bytes, found {len(body)}")
        pts = np.frombuffer(body, dtype="<f4").reshape(n, 3).astype(np.float64)
        return PointCloud(pts, frame)
    with open(path) as fh:
        header = fh.readline().strip().replace(" ", "")
        if header != "x,y,z":
            raise ValueError(f"{path}: expected CSV header 'x,y,z', found {header!r}")
        rows = [line.split(",") for line in fh if line.strip()]
    return PointCloud(np.array(rows, dtype=np.float64).reshape(-1, 3), frame)
