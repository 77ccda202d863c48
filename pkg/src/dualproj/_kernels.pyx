# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: map binning, voxel occupancy, ray casting.

Every routine mirrors ``_pykernels`` operation for operation so both
backends produce identical floating-point results.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt, atan2, INFINITY

cnp.import_array()

DEF E_ROWS = 21
DEF E_COLS = 17
DEF E_BACK = 5
DEF D_ROWS = 13
DEF D_COLS = 17
DEF E_TRASH = E_ROWS * E_COLS


cdef inline void _elev_acc(double* buf, double x, double y, double z, double delta) noexcept nogil:
    # branch-free: out-of-footprint points land in a trash slot
    cdef double u = x / delta + E_BACK
    cdef double v = y / delta + 8.5
    cdef bint ok = (u >= 0.0) & (u < E_ROWS) & (v >= 0.0) & (v < E_COLS)
    cdef Py_ssize_t idx
    u = u if ok else 0.0
    v = v if ok else 0.0
    # u, v >= 0 here, so truncation is floor
    idx = <Py_ssize_t>u * E_COLS + <Py_ssize_t>v
    idx = idx if ok else E_TRASH
    cdef double t = buf[idx]
    buf[idx] = z if z > t else t


cdef object _elev_finish(double* buf, double sentinel):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.empty((E_ROWS, E_COLS))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(E_ROWS):
        for j in range(E_COLS):
            out[i, j] = sentinel if buf[i * E_COLS + j] == -INFINITY else buf[i * E_COLS + j]
    return out_arr


def elevation_kernel(const double[:, ::1] pts, double delta, double sentinel):
    cdef double buf[E_TRASH + 1]
    cdef Py_ssize_t n = pts.shape[0], k
    for k in range(E_TRASH + 1):
        buf[k] = -INFINITY
    with nogil:
        for k in range(n):
            _elev_acc(buf, pts[k, 0], pts[k, 1], pts[k, 2], delta)
    return _elev_finish(buf, sentinel)


def distance_kernel(const double[:, ::1] pts, double r, double delta_r,
                    double ang_width, double half_sector, double z_lo, double z_hi):
    # cells accumulate the minimum squared distance; sqrt is monotone, so
    # taking it once per cell afterwards gives the same minimum
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_arr = np.full((D_ROWS, D_COLS), INFINITY)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n = pts.shape[0], k, i, j
    cdef double x, y, z, rho2, rho, theta, u, v, d2
    with nogil:
        for k in range(n):
            z = pts[k, 2]
            if z < z_lo or z > z_hi:
                continue
            x = pts[k, 0]
            if x <= 0.0:
                continue
            y = pts[k, 1]
            rho2 = x * x + y * y
            rho = sqrt(rho2)
            if rho > r or rho == 0.0:
                continue
            theta = atan2(y, x)
            if theta < -half_sector or theta > half_sector:
                continue
            u = rho / delta_r
            i = <Py_ssize_t>u
            if i > D_ROWS - 1:
                i = D_ROWS - 1
            v = (theta + half_sector) / ang_width
            j = <Py_ssize_t>v
            if j > D_COLS - 1:
                j = D_COLS - 1
            d2 = rho2 + z * z
            if d2 < out[i, j]:
                out[i, j] = d2
        for i in range(D_ROWS):
            for j in range(D_COLS):
                d2 = sqrt(out[i, j])
                out[i, j] = d2 if d2 < r else r
    return out_arr


def voxel_kernel(const double[:, ::1] pts, double lo_x, double lo_y, double lo_z,
                 double cell, int nx, int ny, int nz):
    cdef Py_ssize_t trash = <Py_ssize_t>nx * ny * nz
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] out_arr = np.zeros(trash + 1, dtype=np.uint8)
    cdef cnp.uint8_t[::1] out = out_arr
    cdef Py_ssize_t n = pts.shape[0], k, idx
    cdef double u, v, w
    cdef bint ok
    with nogil:
        for k in range(n):
            u = (pts[k, 0] - lo_x) / cell
            v = (pts[k, 1] - lo_y) / cell
            w = (pts[k, 2] - lo_z) / cell
            ok = (u >= 0.0) & (u < nx) & (v >= 0.0) & (v < ny) & (w >= 0.0) & (w < nz)
            u = u if ok else 0.0
            v = v if ok else 0.0
            w = w if ok else 0.0
            idx = (<Py_ssize_t>u * ny + <Py_ssize_t>v) * nz + <Py_ssize_t>w
            out[idx if ok else trash] = 1
    return out_arr[:trash].reshape(nx, ny, nz)


cdef inline double _hf_height(const double[:, ::1] h, double ox, double oy, double cell,
                              double x, double y) noexcept nogil:
    cdef Py_ssize_t nx = h.shape[0], ny = h.shape[1], i, j
    cdef double u = (x - ox) / cell
    cdef double v = (y - oy) / cell
    cdef double fu, fv
    if u < 0.0:
        u = 0.0
    elif u > nx - 1:
        u = nx - 1
    if v < 0.0:
        v = 0.0
    elif v > ny - 1:
        v = ny - 1
    # clamped to >= 0, so truncation is floor
    i = <Py_ssize_t>u
    j = <Py_ssize_t>v
    if i > nx - 2:
        i = nx - 2
    if j > ny - 2:
        j = ny - 2
    fu = u - i
    fv = v - j
    return ((1.0 - fu) * (1.0 - fv) * h[i, j] + fu * (1.0 - fv) * h[i + 1, j]
            + (1.0 - fu) * fv * h[i, j + 1] + fu * fv * h[i + 1, j + 1])


cdef inline double _slab_lo(double o, double d, double lo, double hi, double* t_hi) noexcept nogil:
    # returns entry t of [lo, hi] along one axis; writes exit t; NaN-free
    cdef double t1, t2
    if d == 0.0:
        if o < lo or o > hi:
            t_hi[0] = -INFINITY
            return INFINITY
        t_hi[0] = INFINITY
        return -INFINITY
    t1 = (lo - o) / d
    t2 = (hi - o) / d
    if t1 > t2:
        t1, t2 = t2, t1
    t_hi[0] = t2
    return t1


def march_heightfield(const double[:, ::1] heights, double ox, double oy, double cell,
                      double hmin, double hmax,
                      const double[:, ::1] origins, const double[:, ::1] dirs,
                      double max_range, double stride, double tol):
    """Nearest ground crossing per ray; ``inf`` where none lies within ``max_range``."""
    cdef Py_ssize_t m = origins.shape[0], q
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.full(m, INFINITY)
    cdef double[::1] out = out_arr
    cdef double x1 = ox + (heights.shape[0] - 1) * cell
    cdef double y1 = oy + (heights.shape[1] - 1) * cell
    cdef double px, py, pz, dx, dy, dz, t_lo, t_hi, a, b, tz_lo, tz_hi
    cdef double t_prev, f_prev, t, f, lo, hi, mid, fm, hit
    cdef long k
    with nogil:
        for q in range(m):
            px = origins[q, 0]
            py = origins[q, 1]
            pz = origins[q, 2]
            dx = dirs[q, 0]
            dy = dirs[q, 1]
            dz = dirs[q, 2]
            t_lo = _slab_lo(px, dx, ox, x1, &t_hi)
            a = _slab_lo(py, dy, oy, y1, &b)
            if a > t_lo:
                t_lo = a
            if b < t_hi:
                t_hi = b
            if dz > 0.0:
                if pz > hmax:
                    continue
                tz_lo = -INFINITY
                tz_hi = (hmax - pz) / dz
            elif dz < 0.0:
                tz_lo = (hmax - pz) / dz
                tz_hi = (hmin - pz) / dz
            else:
                if pz > hmax:
                    continue
                tz_lo = -INFINITY
                tz_hi = INFINITY
            if tz_lo > t_lo:
                t_lo = tz_lo
            if tz_hi < t_hi:
                t_hi = tz_hi
            if t_lo < 0.0:
                t_lo = 0.0
            if t_lo > t_hi:
                continue
            hit = INFINITY
            t_prev = t_lo
            f_prev = pz + t_prev * dz - _hf_height(heights, ox, oy, cell, px + t_prev * dx, py + t_prev * dy)
            if f_prev <= 0.0:
                hit = t_prev
            else:
                k = <long>floor(t_lo / stride) + 1
                while t_prev < t_hi and t_prev < max_range:
                    t = k * stride
                    if t > t_hi:
                        t = t_hi
                    f = pz + t * dz - _hf_height(heights, ox, oy, cell, px + t * dx, py + t * dy)
                    if f <= 0.0:
                        lo = t_prev
                        hi = t
                        while hi - lo > tol:
                            mid = 0.5 * (lo + hi)
                            fm = pz + mid * dz - _hf_height(heights, ox, oy, cell, px + mid * dx, py + mid * dy)
                            if fm <= 0.0:
                                hi = mid
                            else:
                                lo = mid
                        hit = 0.5 * (lo + hi)
                        break
                    t_prev = t
                    k += 1
            if hit <= max_range:
                out[q] = hit
    return out_arr


def cast_boxes(const double[:, ::1] lo, const double[:, ::1] hi,
               const double[:, ::1] origins, const double[:, ::1] dirs, double max_range):
    """Nearest box entry per ray by the slab test; ``inf`` where none."""
    cdef Py_ssize_t m = origins.shape[0], nb = lo.shape[0], q, b, ax
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_arr = np.full(m, INFINITY)
    cdef double[::1] out = out_arr
    cdef double tn, tf, a, e, best
    with nogil:
        for q in range(m):
            best = INFINITY
            for b in range(nb):
                tn = -INFINITY
                tf = INFINITY
                for ax in range(3):
                    a = _slab_lo(origins[q, ax], dirs[q, ax], lo[b, ax], hi[b, ax], &e)
                    if a > tn:
                        tn = a
                    if e < tf:
                        tf = e
                if tn > tf or tf < 0.0:
                    continue
                if tn < 0.0:
                    tn = 0.0
                if tn < best:
                    best = tn
            if best <= max_range:
                out[q] = best
    return out_arr


def dual_kernel(const double[:, ::1] pts, double delta_e, double sentinel_e,
                double r, double delta_r, double ang_width, double half_sector,
                double z_lo, double z_hi):
    """Elevation and distance maps in one pass over the points.

    Same per-map arithmetic as ``elevation_kernel`` and ``distance_kernel``.
    """
    cdef double buf[E_TRASH + 1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] d_arr = np.full((D_ROWS, D_COLS), INFINITY)
    cdef double[:, ::1] dm = d_arr
    cdef Py_ssize_t n = pts.shape[0], k, i, j
    cdef double x, y, z, rho2, rho, theta, d2
    for k in range(E_TRASH + 1):
        buf[k] = -INFINITY
    with nogil:
        for k in range(n):
            x = pts[k, 0]
            y = pts[k, 1]
            z = pts[k, 2]
            _elev_acc(buf, x, y, z, delta_e)
            if z < z_lo or z > z_hi or x <= 0.0:
                continue
            rho2 = x * x + y * y
            rho = sqrt(rho2)
            if rho > r or rho == 0.0:
                continue
            theta = atan2(y, x)
            if theta < -half_sector or theta > half_sector:
                continue
            i = <Py_ssize_t>(rho / delta_r)
            if i > D_ROWS - 1:
                i = D_ROWS - 1
            j = <Py_ssize_t>((theta + half_sector) / ang_width)
            if j > D_COLS - 1:
                j = D_COLS - 1
            d2 = rho2 + z * z
            if d2 < dm[i, j]:
                dm[i, j] = d2
        for i in range(D_ROWS):
            for j in range(D_COLS):
                d2 = sqrt(dm[i, j])
                dm[i, j] = d2 if d2 < r else r
    return _elev_finish(buf, sentinel_e), d_arr
