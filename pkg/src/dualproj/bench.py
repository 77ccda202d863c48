"""Timing of dual projection against voxelization on one shared cloud."""

from __future__ import annotations

import time
from typing import Optional

import numpy as np

from . import _backend
from .geometry import PointCloud
from .projection import (ANGULAR_WIDTH, D_SHAPE, E_SHAPE, ELEVATION_SENTINEL, HALF_SECTOR,
                         SENSORY_DIMS, VOXEL_CELL, VOXEL_DIMS, VOXEL_LO, VOXEL_SHAPE, height_band)


def scan_like_cloud(n: int, seed: int) -> PointCloud:
    """Base-frame cloud: three quarters noisy ground, one quarter obstacle returns."""
    rng = np.random.default_rng(seed)
    n_ground = (3 * n) // 4
    g = np.column_stack([rng.uniform(-2.0, 8.0, n_ground), rng.uniform(-4.0, 4.0, n_ground),
                         -0.74 + rng.uniform(-0.05, 0.05, n_ground)])
    m = n - n_ground
    o = np.column_stack([rng.uniform(-2.0, 8.0, m), rng.uniform(-4.0, 4.0, m), rng.uniform(-0.7, 1.3, m)])
    pts = np.concatenate([g, o])
    return PointCloud(pts[rng.permutation(n)], "base")


def _median_ns(fn, repeats: int) -> float:
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        fn()
        times.append(time.perf_counter_ns() - t0)
    return float(np.median(times))


def run_bench(n_points: int = 100_000, repeats: int = 50, seed: int = 0, r: float = 3.0,
              backend: Optional[str] = None) -> dict:
    k = _backend.get(backend)
    pts = scan_like_cloud(n_points, seed).points
    z_lo, z_hi = height_band()
    args = (pts, r / E_SHAPE[0], ELEVATION_SENTINEL, r, r / D_SHAPE[0], ANGULAR_WIDTH, HALF_SECTOR, z_lo, z_hi)

    def dual():
        return k.dual_kernel(*args)

    def voxel():
        return k.voxel_kernel(pts, *VOXEL_LO, VOXEL_CELL, *VOXEL_SHAPE)

    e, d = dual()
    occ = voxel()
    t_dual = _median_ns(dual, repeats)
    t_vox = _median_ns(voxel, repeats)
    return {
        "backend": k.__name__.rsplit(".", 1)[-1],
        "points": n_points,
        "repeats": repeats,
        "seed": seed,
        "radius": r,
        "dual_projection": {
            "dims": SENSORY_DIMS,
            "cells_written": int(e.size + d.size),
            "occupied_or_filled": int((e != ELEVATION_SENTINEL).sum() + (d < r).sum()),
            "median_ns": t_dual,
        },
        "voxel": {
            "dims": VOXEL_DIMS,
            "cells_written": int(occ.size),
            "occupied_or_filled": int(occ.sum()),
            "median_ns": t_vox,
        },
        "reduction": 1.0 - SENSORY_DIMS / VOXEL_DIMS,
        "speedup": t_vox / t_dual if t_dual > 0 else float("inf"),
    }


TIMING_KEYS = ("median_ns", "speedup")
