# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels.  Same contracts as ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, sqrt, INFINITY

cnp.import_array()

cdef double Z_MIN = 1e-6


cdef inline bint _sample(const double[:, ::1] img, const double[:, ::1] gx,
                         const double[:, ::1] gy, double u, double v,
                         double* val, double* dx, double* dy) nogil:
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t x0, y0
    cdef double ax, ay, w00, w01, w10, w11
    if not (u >= 1.0 and u <= w - 2.0 and v >= 1.0 and v <= h - 2.0):
        return False
    x0 = <Py_ssize_t>floor(u)
    y0 = <Py_ssize_t>floor(v)
    if x0 > w - 3:
        x0 = w - 3
    if y0 > h - 3:
        y0 = h - 3
    ax = u - x0
    ay = v - y0
    w00 = (1 - ax) * (1 - ay)
    w01 = ax * (1 - ay)
    w10 = (1 - ax) * ay
    w11 = ax * ay
    val[0] = (w00 * img[y0, x0] + w01 * img[y0, x0 + 1]
              + w10 * img[y0 + 1, x0] + w11 * img[y0 + 1, x0 + 1])
    dx[0] = (w00 * gx[y0, x0] + w01 * gx[y0, x0 + 1]
             + w10 * gx[y0 + 1, x0] + w11 * gx[y0 + 1, x0 + 1])
    dy[0] = (w00 * gy[y0, x0] + w01 * gy[y0, x0 + 1]
             + w10 * gy[y0 + 1, x0] + w11 * gy[y0 + 1, x0 + 1])
    return True


cdef inline bint _residual(const double[:, ::1] q, Py_ssize_t i, const double[:] ref,
                           const double[:, ::1] R, const double[:] t,
                           double fx, double fy, double cx, double cy,
                           const double[:, ::1] img, const double[:, ::1] gx,
                           const double[:, ::1] gy, double* r, double* J,
                           double* gnorm) nogil:
    cdef double q0 = q[i, 0], q1 = q[i, 1], q2 = q[i, 2]
    cdef double px = R[0, 0] * q0 + R[0, 1] * q1 + R[0, 2] * q2 + t[0]
    cdef double py = R[1, 0] * q0 + R[1, 1] * q1 + R[1, 2] * q2 + t[1]
    cdef double pz = R[2, 0] * q0 + R[2, 1] * q1 + R[2, 2] * q2 + t[2]
    cdef double iz, val, dx, dy, d0, d1, d2, g0, g1, g2
    if pz <= Z_MIN:
        return False
    iz = 1.0 / pz
    if not _sample(img, gx, gy, fx * px * iz + cx, fy * py * iz + cy, &val, &dx, &dy):
        return False
    r[0] = ref[i] - val
    d0 = -dx * fx * iz
    d1 = -dy * fy * iz
    d2 = (dx * fx * px + dy * fy * py) * iz * iz
    g0 = d0 * R[0, 0] + d1 * R[1, 0] + d2 * R[2, 0]
    g1 = d0 * R[0, 1] + d1 * R[1, 1] + d2 * R[2, 1]
    g2 = d0 * R[0, 2] + d1 * R[1, 2] + d2 * R[2, 2]
    J[0] = q1 * g2 - q2 * g1
    J[1] = q2 * g0 - q0 * g2
    J[2] = q0 * g1 - q1 * g0
    J[3] = g0
    J[4] = g1
    J[5] = g2
    gnorm[0] = sqrt(dx * dx + dy * dy)
    return True


def photometric_residuals(q, ref, R, t, cam, img, gx, gy):
    cdef const double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64).reshape(-1, 3)
    cdef const double[:] refv = np.ascontiguousarray(ref, dtype=np.float64).reshape(-1)
    cdef const double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[:, ::1] iv = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[:, ::1] gxv = np.ascontiguousarray(gx, dtype=np.float64)
    cdef const double[:, ::1] gyv = np.ascontiguousarray(gy, dtype=np.float64)
    cdef double fx = cam[0], fy = cam[1], cx = cam[2], cy = cam[3]
    cdef Py_ssize_t n = qv.shape[0], i, k
    res = np.zeros(n)
    J = np.zeros((n, 6))
    valid = np.zeros(n, dtype=bool)
    gnorm = np.zeros(n)
    cdef double[:] resv = res
    cdef double[:, ::1] Jv = J
    cdef cnp.uint8_t[:] valv = valid.view(np.uint8)
    cdef double[:] gnv = gnorm
    cdef double r, gn
    cdef double Jrow[6]
    with nogil:
        for i in range(n):
            if _residual(qv, i, refv, Rv, tv, fx, fy, cx, cy, iv, gxv, gyv, &r, Jrow, &gn):
                resv[i] = r
                for k in range(6):
                    Jv[i, k] = Jrow[k]
                valv[i] = 1
                gnv[i] = gn
    return res, J, valid, gnorm


def photometric_accumulate(q, ref, R, t, cam, img, gx, gy, double huber, double min_grad):
    cdef const double[:, ::1] qv = np.ascontiguousarray(q, dtype=np.float64).reshape(-1, 3)
    cdef const double[:] refv = np.ascontiguousarray(ref, dtype=np.float64).reshape(-1)
    cdef const double[:, ::1] Rv = np.ascontiguousarray(R, dtype=np.float64)
    cdef const double[:] tv = np.ascontiguousarray(t, dtype=np.float64)
    cdef const double[:, ::1] iv = np.ascontiguousarray(img, dtype=np.float64)
    cdef const double[:, ::1] gxv = np.ascontiguousarray(gx, dtype=np.float64)
    cdef const double[:, ::1] gyv = np.ascontiguousarray(gy, dtype=np.float64)
    cdef double fx = cam[0], fy = cam[1], cx = cam[2], cy = cam[3]
    cdef Py_ssize_t n = qv.shape[0], i, a, c
    H = np.zeros((6, 6))
    b = np.zeros(6)
    cdef double[:, ::1] Hv = H
    cdef double[:] bv = b
    cdef double energy = 0.0, r, gn, ar, w
    cdef long n_valid = 0, n_inf = 0
    cdef double Jrow[6]
    with nogil:
        for i in range(n):
            if not _residual(qv, i, refv, Rv, tv, fx, fy, cx, cy, iv, gxv, gyv, &r, Jrow, &gn):
                continue
            n_valid += 1
            if gn > min_grad:
                n_inf += 1
            ar = fabs(r)
            if ar <= huber:
                energy += r * r
                w = 1.0
            else:
                energy += huber * (2.0 * ar - huber)
                w = huber / ar
            for a in range(6):
                bv[a] += w * Jrow[a] * r
                for c in range(a, 6):
                    Hv[a, c] += w * Jrow[a] * Jrow[c]
    for a in range(6):
        for c in range(a):
            Hv[a, c] = Hv[c, a]
    return energy, H, b, n_valid, n_inf


def raycast(origin, dirs, centers, normals, axes_u, axes_v, half_u, half_v):
    cdef const double[:, ::1] dv = np.ascontiguousarray(dirs, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, ::1] cv = np.ascontiguousarray(centers, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, ::1] nv = np.ascontiguousarray(normals, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, ::1] uv = np.ascontiguousarray(axes_u, dtype=np.float64).reshape(-1, 3)
    cdef const double[:, ::1] vv = np.ascontiguousarray(axes_v, dtype=np.float64).reshape(-1, 3)
    cdef const double[:] hu = np.ascontiguousarray(half_u, dtype=np.float64).reshape(-1)
    cdef const double[:] hv = np.ascontiguousarray(half_v, dtype=np.float64).reshape(-1)
    cdef double o0 = origin[0], o1 = origin[1], o2 = origin[2]
    cdef Py_ssize_t n = dv.shape[0], m = cv.shape[0], i, k
    best = np.full(n, np.inf)
    idx = np.full(n, -1, dtype=np.int64)
    s_out = np.zeros(n)
    r_out = np.zeros(n)
    cdef double[:] bv = best
    cdef long long[:] iv = idx
    cdef double[:] sv = s_out
    cdef double[:] rv = r_out
    # per-patch constants
    num_a = np.empty(m)
    su0 = np.empty(m)
    rv0 = np.empty(m)
    cdef double[:] numv = num_a
    cdef double[:] su0v = su0
    cdef double[:] rv0v = rv0
    cdef double d0, d1, d2, den, tk, s, r
    for k in range(m):
        numv[k] = (nv[k, 0] * (cv[k, 0] - o0) + nv[k, 1] * (cv[k, 1] - o1)
                   + nv[k, 2] * (cv[k, 2] - o2))
        su0v[k] = (uv[k, 0] * (o0 - cv[k, 0]) + uv[k, 1] * (o1 - cv[k, 1])
                   + uv[k, 2] * (o2 - cv[k, 2]))
        rv0v[k] = (vv[k, 0] * (o0 - cv[k, 0]) + vv[k, 1] * (o1 - cv[k, 1])
                   + vv[k, 2] * (o2 - cv[k, 2]))
    with nogil:
        for i in range(n):
            d0 = dv[i, 0]
            d1 = dv[i, 1]
            d2 = dv[i, 2]
            for k in range(m):
                den = nv[k, 0] * d0 + nv[k, 1] * d1 + nv[k, 2] * d2
                if fabs(den) <= 1e-12:
                    continue
                tk = numv[k] / den
                if not (tk > 0 and tk < bv[i]):
                    continue
                s = su0v[k] + tk * (uv[k, 0] * d0 + uv[k, 1] * d1 + uv[k, 2] * d2)
                if fabs(s) > hu[k]:
                    continue
                r = rv0v[k] + tk * (vv[k, 0] * d0 + vv[k, 1] * d1 + vv[k, 2] * d2)
                if fabs(r) > hv[k]:
                    continue
                bv[i] = tk
                iv[i] = k
                sv[i] = s
                rv[i] = r
    return best, idx, s_out, r_out
