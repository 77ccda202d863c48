"""Time every hot kernel on the compiled and numpy backends.

    python3 benchmarks/bench_backends.py [--points N] [--repeats K] [--json out.json]
"""

import argparse
import json
import sys
import time

import numpy as np

from dualproj import _backend
from dualproj.bench import scan_like_cloud
from dualproj.geometry import Pose
from dualproj.lidar import ScanPattern, scan
from dualproj.projection import (ANGULAR_WIDTH, D_SHAPE, E_SHAPE, ELEVATION_SENTINEL, HALF_SECTOR,
                                 VOXEL_CELL, VOXEL_LO, VOXEL_SHAPE, height_band)
from dualproj.terrain import TrackSpec, assemble_track


def median_ms(fn, repeats):
    fn()
    t = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        t.append(time.perf_counter() - t0)
    return 1e3 * float(np.median(t))


def cases(name, pts, r, layout, pattern, pose):
    k = _backend.get(name)
    z_lo, z_hi = height_band()
    scene = layout.scene()
    return {
        "elevation": lambda: k.elevation_kernel(pts, r / E_SHAPE[0], ELEVATION_SENTINEL),
        "distance": lambda: k.distance_kernel(pts, r, r / D_SHAPE[0], ANGULAR_WIDTH, HALF_SECTOR, z_lo, z_hi),
        "dual": lambda: k.dual_kernel(pts, r / E_SHAPE[0], ELEVATION_SENTINEL, r, r / D_SHAPE[0],
                                      ANGULAR_WIDTH, HALF_SECTOR, z_lo, z_hi),
        "voxel": lambda: k.voxel_kernel(pts, *VOXEL_LO, VOXEL_CELL, *VOXEL_SHAPE),
        "scan": lambda: scan(scene, pose, pattern, backend=name),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeats", type=int, default=20)
    ap.add_argument("--radius", type=float, default=3.0)
    ap.add_argument("--json", help="also write the results here")
    a = ap.parse_args(argv)

    pts = scan_like_cloud(a.points, 0).points
    layout = assemble_track(TrackSpec(modules=("stairs_up", "hurdle", "narrow_gate"), difficulty=0.5, seed=0))
    pattern = ScanPattern.uniform(180, -7.0, 52.0, 20, 8.0)
    pose = Pose((2.0, 0.0, layout.heightfield.sample(2.0, 0.0) + 0.74))

    names = _backend.available()
    table = {}
    for name in names:
        reps = a.repeats if name == "compiled" else max(3, a.repeats // 4)
        table[name] = {case: median_ms(fn, reps) for case, fn in cases(name, pts, a.radius, layout, pattern, pose).items()}

    cols = list(next(iter(table.values())))
    print(f"{'kernel':<10}" + "".join(f"{n:>12}" for n in names) + ("     ratio" if len(names) > 1 else ""))
    for c in cols:
        row = f"{c:<10}" + "".join(f"{table[n][c]:>10.3f}ms" for n in names)
        if len(names) > 1:
            row += f"{table['python'][c] / table['compiled'][c]:>9.1f}x"
        print(row)
    if a.json:
        with open(a.json, "w") as fh:
            json.dump({"points": a.points, "radius": a.radius, "median_ms": table}, fh, indent=2, sort_keys=True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
