"""Scalar per-point reference implementations, deliberately naive."""

import math

import numpy as np


def elevation_oracle(pts, r, sentinel=-1.0):
    delta = r / 21
    cells = [[None] * 17 for _ in range(21)]
    for x, y, z in np.asarray(pts, dtype=float).tolist():
        u = x / delta + 5
        v = y / delta + 8.5
        if 0.0 <= u < 21 and 0.0 <= v < 17:
            i, j = math.floor(u), math.floor(v)
            if cells[i][j] is None or z > cells[i][j]:
                cells[i][j] = z
    return np.array([[sentinel if c is None else c for c in row] for row in cells])


def distance_oracle(pts, r, z_lo=0.1 - 0.74, z_hi=2.0 - 0.74):
    delta = r / 13
    width = (math.pi / 2) / 17
    cells = [[r] * 17 for _ in range(13)]
    for x, y, z in np.asarray(pts, dtype=float).tolist():
        if not z_lo <= z <= z_hi:
            continue
        rho2 = x * x + y * y
        rho = math.sqrt(rho2)
        if rho == 0.0 or rho > r:
            continue
        theta = math.atan2(y, x)
        if not -math.pi / 4 <= theta <= math.pi / 4:
            continue
        i = min(math.floor(rho / delta), 12)
        j = min(math.floor((theta + math.pi / 4) / width), 16)
        d = math.sqrt(rho2 + z * z)
        cells[i][j] = min(cells[i][j], d)
    return np.array(cells)


def voxel_index(p, lo=(-0.8, -0.8, -1.0), cell=0.05, shape=(32, 32, 40)):
    idx = tuple(math.floor((p[k] - lo[k]) / cell) for k in range(3))
    if all(0 <= idx[k] < shape[k] for k in range(3)):
        return idx
    return None


def bilinear(h, origin, cell, x, y):
    u = (x - origin[0]) / cell
    v = (y - origin[1]) / cell
    i = min(int(math.floor(u)), len(h) - 2)
    j = min(int(math.floor(v)), len(h[0]) - 2)
    fu, fv = u - i, v - j
    return ((1 - fu) * (1 - fv) * h[i][j] + fu * (1 - fv) * h[i + 1][j]
            + (1 - fu) * fv * h[i][j + 1] + fu * fv * h[i + 1][j + 1])


def ray_box(o, d, lo, hi):
    """Closed-form slab entry distance, or None."""
    tn, tf = -math.inf, math.inf
    for k in range(3):
        if d[k] == 0.0:
            if not lo[k] <= o[k] <= hi[k]:
                return None
            continue
        a, b = (lo[k] - o[k]) / d[k], (hi[k] - o[k]) / d[k]
        tn, tf = max(tn, min(a, b)), min(tf, max(a, b))
    if tn > tf or tf < 0:
        return None
    return max(tn, 0.0)
