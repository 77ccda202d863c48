"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``.

Signatures and floating-point operation order match the compiled module,
so the two backends agree bit for bit on the same inputs.
"""

import math

import numpy as np

E_ROWS, E_COLS, E_BACK = 21, 17, 5
D_ROWS, D_COLS = 13, 17

# numpy's vectorised arctan2 may differ from libm by a few ulp; bins whose
# coordinate lands this close to an edge are recomputed with math.atan2.
_EDGE_GUARD = 1e-7


def elevation_kernel(pts, delta, sentinel):
    out = np.full((E_ROWS, E_COLS), -np.inf)
    if len(pts):
        u = pts[:, 0] / delta + E_BACK
        v = pts[:, 1] / delta + 8.5
        keep = (u >= 0.0) & (u < E_ROWS) & (v >= 0.0) & (v < E_COLS)
        i = u[keep].astype(np.intp)
        j = v[keep].astype(np.intp)
        np.maximum.at(out, (i, j), pts[keep, 2])
    out[out == -np.inf] = sentinel
    return out


def _bearing(y, x):
    return np.arctan2(y, x)


def distance_kernel(pts, r, delta_r, ang_width, half_sector, z_lo, z_hi):
    out = np.full((D_ROWS, D_COLS), float(r))
    if not len(pts):
        return out
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    keep = (z >= z_lo) & (z <= z_hi) & (x > 0.0)
    x, y, z = x[keep], y[keep], z[keep]
    rho2 = x * x + y * y
    rho = np.sqrt(rho2)
    keep = (rho > 0.0) & (rho <= r)
    x, y, z, rho2, rho = x[keep], y[keep], z[keep], rho2[keep], rho[keep]

    theta = _bearing(y, x)
    u = (theta + half_sector) / ang_width
    near = np.abs(u - np.round(u)) < _EDGE_GUARD
    for idx in np.flatnonzero(near):
        theta[idx] = math.atan2(float(y[idx]), float(x[idx]))
    keep = (theta >= -half_sector) & (theta <= half_sector)
    theta, rho, rho2, z = theta[keep], rho[keep], rho2[keep], z[keep]

    fi = np.minimum(np.floor(rho / delta_r), D_ROWS - 1)
    fj = np.minimum(np.floor((theta + half_sector) / ang_width), D_COLS - 1)
    d2 = np.full((D_ROWS, D_COLS), np.inf)
    np.minimum.at(d2, (fi.astype(np.intp), fj.astype(np.intp)), rho2 + z * z)
    return np.minimum(np.sqrt(d2), r)


def dual_kernel(pts, delta_e, sentinel_e, r, delta_r, ang_width, half_sector, z_lo, z_hi):
    return (elevation_kernel(pts, delta_e, sentinel_e),
            distance_kernel(pts, r, delta_r, ang_width, half_sector, z_lo, z_hi))


def voxel_kernel(pts, lo_x, lo_y, lo_z, cell, nx, ny, nz):
    out = np.zeros((nx, ny, nz), dtype=np.uint8)
    if len(pts):
        fx = np.floor((pts[:, 0] - lo_x) / cell)
        fy = np.floor((pts[:, 1] - lo_y) / cell)
        fz = np.floor((pts[:, 2] - lo_z) / cell)
        keep = (fx >= 0) & (fx < nx) & (fy >= 0) & (fy < ny) & (fz >= 0) & (fz < nz)
        out[fx[keep].astype(np.intp), fy[keep].astype(np.intp), fz[keep].astype(np.intp)] = 1
    return out


def _hf_height(h, ox, oy, cell, x, y):
    nx, ny = h.shape
    u = np.clip((x - ox) / cell, 0.0, nx - 1)
    v = np.clip((y - oy) / cell, 0.0, ny - 1)
    i = np.minimum(np.floor(u).astype(np.intp), nx - 2)
    j = np.minimum(np.floor(v).astype(np.intp), ny - 2)
    fu = u - i
    fv = v - j
    return ((1.0 - fu) * (1.0 - fv) * h[i, j] + fu * (1.0 - fv) * h[i + 1, j]
            + (1.0 - fu) * fv * h[i, j + 1] + fu * fv * h[i + 1, j + 1])


def _slab(o, d, lo, hi):
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (lo - o) / d
        t2 = (hi - o) / d
    t_in = np.minimum(t1, t2)
    t_out = np.maximum(t1, t2)
    flat = d == 0.0
    inside = (o >= lo) & (o <= hi)
    t_in = np.where(flat, np.where(inside, -np.inf, np.inf), t_in)
    t_out = np.where(flat, np.where(inside, np.inf, -np.inf), t_out)
    return t_in, t_out


def march_heightfield(heights, ox, oy, cell, hmin, hmax, origins, dirs, max_range, stride, tol):
    m = len(origins)
    out = np.full(m, np.inf)
    if m == 0:
        return out
    x1 = ox + (heights.shape[0] - 1) * cell
    y1 = oy + (heights.shape[1] - 1) * cell
    px, py, pz = origins[:, 0], origins[:, 1], origins[:, 2]
    dx, dy, dz = dirs[:, 0], dirs[:, 1], dirs[:, 2]

    t_lo, t_hi = _slab(px, dx, ox, x1)
    a, b = _slab(py, dy, oy, y1)
    t_lo = np.maximum(t_lo, a)
    t_hi = np.minimum(t_hi, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        tz_lo = np.where(dz < 0.0, (hmax - pz) / dz, -np.inf)
        tz_hi = np.where(dz > 0.0, (hmax - pz) / dz, np.where(dz < 0.0, (hmin - pz) / dz, np.inf))
    dead = (dz >= 0.0) & (pz > hmax)
    t_lo = np.maximum(np.maximum(t_lo, tz_lo), 0.0)
    t_hi = np.minimum(t_hi, tz_hi)
    live = ~dead & (t_lo <= t_hi)

    hit = np.full(m, np.inf)
    idx = np.flatnonzero(live)
    t_prev = t_lo[idx]
    f_prev = pz[idx] + t_prev * dz[idx] - _hf_height(
        heights, ox, oy, cell, px[idx] + t_prev * dx[idx], py[idx] + t_prev * dy[idx])
    under = f_prev <= 0.0
    hit[idx[under]] = t_prev[under]
    idx, t_prev = idx[~under], t_prev[~under]
    k = np.floor(t_lo[idx] / stride).astype(np.int64) + 1

    found_idx, found_lo, found_hi = [], [], []
    while len(idx):
        active = (t_prev < t_hi[idx]) & (t_prev < max_range)
        idx, t_prev, k = idx[active], t_prev[active], k[active]
        if not len(idx):
            break
        t = np.minimum(k * stride, t_hi[idx])
        f = pz[idx] + t * dz[idx] - _hf_height(
            heights, ox, oy, cell, px[idx] + t * dx[idx], py[idx] + t * dy[idx])
        cross = f <= 0.0
        found_idx.append(idx[cross])
        found_lo.append(t_prev[cross])
        found_hi.append(t[cross])
        keep = ~cross
        idx, t_prev, k = idx[keep], t[keep], k[keep] + 1

    if found_idx:
        fidx = np.concatenate(found_idx)
        lo = np.concatenate(found_lo)
        hi = np.concatenate(found_hi)
        open_ = hi - lo > tol
        while open_.any():
            sel = np.flatnonzero(open_)
            mid = 0.5 * (lo[sel] + hi[sel])
            q = fidx[sel]
            fm = pz[q] + mid * dz[q] - _hf_height(heights, ox, oy, cell, px[q] + mid * dx[q], py[q] + mid * dy[q])
            below = fm <= 0.0
            hi[sel[below]] = mid[below]
            lo[sel[~below]] = mid[~below]
            open_ = hi - lo > tol
        hit[fidx] = 0.5 * (lo + hi)

    ok = hit <= max_range
    out[ok] = hit[ok]
    return out


def cast_boxes(lo, hi, origins, dirs, max_range):
    m = len(origins)
    best = np.full(m, np.inf)
    for b in range(len(lo)):
        tn = np.full(m, -np.inf)
        tf = np.full(m, np.inf)
        for ax in range(3):
            a, e = _slab(origins[:, ax], dirs[:, ax], lo[b, ax], hi[b, ax])
            tn = np.maximum(tn, a)
            tf = np.minimum(tf, e)
        ok = (tn <= tf) & (tf >= 0.0)
        tn = np.maximum(tn, 0.0)
        best = np.where(ok & (tn < best), tn, best)
    return np.where(best <= max_range, best, np.inf)
