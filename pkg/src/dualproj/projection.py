"""Dual projection: robot-centric elevation map and polar distance map.

Both grids keep a fixed shape; the sensing radius ``r`` only stretches the
cells. A voxel occupancy grid is provided as the dense baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from . import _backend
from .geometry import ContractError, DomainError, PointCloud

E_SHAPE = (21, 17)
D_SHAPE = (13, 17)
E_BACK_CELLS = 5
R_MIN, R_MAX = 1.0, 5.0
ELEVATION_SENTINEL = -1.0
HALF_SECTOR = math.pi / 4
ANGULAR_WIDTH = (math.pi / 2) / D_SHAPE[1]

BASE_HEIGHT = 0.74
OBSTACLE_BAND = (0.1, 2.0)   # above local ground

VOXEL_SHAPE = (32, 32, 40)
VOXEL_CELL = 0.05
VOXEL_LO = (-0.8, -0.8, -1.0)

SENSORY_DIMS = E_SHAPE[0] * E_SHAPE[1] + D_SHAPE[0] * D_SHAPE[1]
VOXEL_DIMS = VOXEL_SHAPE[0] * VOXEL_SHAPE[1] * VOXEL_SHAPE[2]


def _check_radius(r: float) -> float:
    r = float(r)
    if not R_MIN <= r <= R_MAX:
        raise DomainError(f"sensing radius {r} outside [{R_MIN}, {R_MAX}]")
    return r


def radial_interval(r: float) -> float:
    return _check_radius(r) / D_SHAPE[0]


def elevation_cell(r: float) -> float:
    return _check_radius(r) / E_SHAPE[0]


@dataclass
class ElevationMap:
    cells: np.ndarray
    radius: float
    sentinel: float = ELEVATION_SENTINEL


@dataclass
class DistanceMap:
    cells: np.ndarray
    radius: float

    @property
    def sentinel(self) -> float:
        return self.radius


@dataclass
class VoxelGrid:
    occupancy: np.ndarray
    cell: float = VOXEL_CELL

    @property
    def occupied(self) -> int:
        return int(np.count_nonzero(self.occupancy))


def _base_points(cloud: PointCloud) -> np.ndarray:
    if not isinstance(cloud, PointCloud):
        raise ContractError("expected a PointCloud")
    if cloud.frame != "base":
        raise ContractError(f"projection needs a base-frame cloud, got {cloud.frame!r}")
    return cloud.points


def height_band(base_height: float = BASE_HEIGHT, band: Tuple[float, float] = OBSTACLE_BAND):
    """Obstacle band in base-frame z, assuming the ground lies ``base_height`` below."""
    return band[0] - base_height, band[1] - base_height


def elevation_map(cloud: PointCloud, r: float, backend: Optional[str] = None) -> ElevationMap:
    pts = _base_points(cloud)
    delta = elevation_cell(r)
    cells = _backend.get(backend).elevation_kernel(pts, delta, ELEVATION_SENTINEL)
    return ElevationMap(cells, float(r))


def vertical_distance_map(cloud: PointCloud, r: float, base_height: float = BASE_HEIGHT,
                          band: Tuple[float, float] = OBSTACLE_BAND,
                          backend: Optional[str] = None) -> DistanceMap:
    pts = _base_points(cloud)
    r = _check_radius(r)
    z_lo, z_hi = height_band(base_height, band)
    cells = _backend.get(backend).distance_kernel(
        pts, r, r / D_SHAPE[0], ANGULAR_WIDTH, HALF_SECTOR, z_lo, z_hi)
    return DistanceMap(cells, r)


def dual_projection(cloud: PointCloud, r: float, base_height: float = BASE_HEIGHT,
                    band: Tuple[float, float] = OBSTACLE_BAND,
                    backend: Optional[str] = None) -> Tuple[ElevationMap, DistanceMap]:
    """Both maps from a single pass over the points."""
    pts = _base_points(cloud)
    r = _check_radius(r)
    z_lo, z_hi = height_band(base_height, band)
    e, d = _backend.get(backend).dual_kernel(
        pts, r / E_SHAPE[0], ELEVATION_SENTINEL, r, r / D_SHAPE[0],
        ANGULAR_WIDTH, HALF_SECTOR, z_lo, z_hi)
    return ElevationMap(e, r), DistanceMap(d, r)


def voxelize(cloud: PointCloud, backend: Optional[str] = None) -> VoxelGrid:
    pts = _base_points(cloud)
    occ = _backend.get(backend).voxel_kernel(pts, *VOXEL_LO, VOXEL_CELL, *VOXEL_SHAPE)
    return VoxelGrid(occ.view(np.bool_))


def nearest_obstacle_distance(d: DistanceMap) -> float:
    return float(d.cells.min())


# -- export ---------------------------------------------------------------------

def write_grid_csv(path, grid: np.ndarray) -> None:
    with open(path, "w") as fh:
        for row in np.asarray(grid, dtype=np.float64).tolist():
            fh.write(",".join(repr(v) for v in row) + "\n")


def write_pgm(path, grid: np.ndarray, lo: float, hi: float) -> None:
    """8-bit binary PGM, ``lo`` -> 0 and ``hi`` -> 255. The mapping goes to ``<stem>.scale.txt``."""
    path = Path(path)
    g = np.asarray(grid, dtype=np.float64)
    span = hi - lo if hi > lo else 1.0
    px = np.clip(np.rint((g - lo) / span * 255.0), 0, 255).astype(np.uint8)
    rows, cols = px.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{cols} {rows}\n255\n".encode("ascii"))
        fh.write(px.tobytes())
    path.with_suffix(".scale.txt").write_text(
        f"value = {lo!r} + pixel * {span / 255.0!r}\nlo {lo!r}\nhi {hi!r}\n")


def export_maps(out_dir, e: ElevationMap, d: DistanceMap) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_grid_csv(out / "E.csv", e.cells)
    write_grid_csv(out / "D.csv", d.cells)
    e_lo, e_hi = float(e.cells.min()), float(e.cells.max())
    write_pgm(out / "E.pgm", e.cells, e_lo, e_hi)
    write_pgm(out / "D.pgm", d.cells, 0.0, d.radius)
