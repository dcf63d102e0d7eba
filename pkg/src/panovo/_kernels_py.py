"""Pure numpy implementation of the hot kernels.

Mirrors ``_kernels.pyx`` function for function; used when the compiled
extension is unavailable or ``PANOVO_PURE_PYTHON=1`` is set.

Photometric kernels share one convention.  ``q`` holds points in the
frame where the left perturbation ``exp(delta)`` acts, ``(R, t)`` maps
that frame into the target camera, and the residual is
``ref - I_target(pi(R q + t))``.  The Jacobian row with respect to the
twist ``delta = (omega, v)`` is ``(q x g, g)`` where ``g = R^T dr/dp``.
"""

import numpy as np

Z_MIN = 1e-6


def _project_sample(q, R, t, cam, img, gx, gy):
    fx, fy, cx, cy = cam
    h, w = img.shape
    p = q @ R.T + t
    z = p[:, 2]
    front = z > Z_MIN
    zs = np.where(front, z, 1.0)
    inv_z = 1.0 / zs
    u = fx * p[:, 0] * inv_z + cx
    v = fy * p[:, 1] * inv_z + cy
    valid = front & (u >= 1.0) & (u <= w - 2.0) & (v >= 1.0) & (v <= h - 2.0)
    us = np.where(valid, u, 1.0)
    vs = np.where(valid, v, 1.0)
    x0 = np.minimum(np.floor(us).astype(np.intp), w - 3)
    y0 = np.minimum(np.floor(vs).astype(np.intp), h - 3)
    ax = us - x0
    ay = vs - y0
    w00 = (1 - ax) * (1 - ay)
    w01 = ax * (1 - ay)
    w10 = (1 - ax) * ay
    w11 = ax * ay

    def interp(a):
        return (w00 * a[y0, x0] + w01 * a[y0, x0 + 1]
                + w10 * a[y0 + 1, x0] + w11 * a[y0 + 1, x0 + 1])

    val = interp(img)
    dx = interp(gx)
    dy = interp(gy)
    return p, inv_z, val, dx, dy, valid


def photometric_residuals(q, ref, R, t, cam, img, gx, gy):
    """Per-point residuals, twist Jacobians, validity and target gradient norm."""
    q = np.ascontiguousarray(q, dtype=float).reshape(-1, 3)
    ref = np.asarray(ref, dtype=float).reshape(-1)
    fx, fy = cam[0], cam[1]
    p, inv_z, val, dx, dy, valid = _project_sample(q, R, t, cam, img, gx, gy)
    res = ref - val
    # dr/dp = -grad . d(pi)/dp
    drdp = np.empty_like(p)
    drdp[:, 0] = -dx * fx * inv_z
    drdp[:, 1] = -dy * fy * inv_z
    drdp[:, 2] = (dx * fx * p[:, 0] + dy * fy * p[:, 1]) * inv_z * inv_z
    g = drdp @ R
    J = np.concatenate([np.cross(q, g), g], axis=1)
    res[~valid] = 0.0
    J[~valid] = 0.0
    gnorm = np.where(valid, np.hypot(dx, dy), 0.0)
    return res, J, valid, gnorm


def photometric_accumulate(q, ref, R, t, cam, img, gx, gy, huber, min_grad):
    """Huber-weighted normal equations over all valid residuals.

    Returns ``(energy, H, b, n_valid, n_informative)`` where ``H = sum w J^T J``
    and ``b = sum w J^T r``.
    """
    res, J, valid, gnorm = photometric_residuals(q, ref, R, t, cam, img, gx, gy)
    r = res[valid]
    Jv = J[valid]
    a = np.abs(r)
    inlier = a <= huber
    energy = float(np.sum(np.where(inlier, r * r, huber * (2.0 * a - huber))))
    w = np.where(inlier, 1.0, huber / np.where(inlier, 1.0, a))
    Jw = Jv * w[:, None]
    H = Jw.T @ Jv
    b = Jw.T @ r
    return energy, H, b, int(valid.sum()), int(np.count_nonzero(gnorm[valid] > min_grad))


def raycast(origin, dirs, centers, normals, axes_u, axes_v, half_u, half_v):
    """Nearest ray/rectangle intersection.

    Returns ``(t, idx, s, r)``: ray parameter (inf on miss), patch index
    (-1 on miss) and in-plane coordinates of the hit along the two patch
    axes.
    """
    dirs = np.asarray(dirs, dtype=float).reshape(-1, 3)
    n = len(dirs)
    best = np.full(n, np.inf)
    idx = np.full(n, -1, dtype=np.int64)
    s_out = np.zeros(n)
    r_out = np.zeros(n)
    o = np.asarray(origin, dtype=float)
    for k in range(len(centers)):
        nrm = normals[k]
        denom = dirs @ nrm
        num = float(nrm @ (centers[k] - o))
        ok = np.abs(denom) > 1e-12
        tk = np.where(ok, num / np.where(ok, denom, 1.0), np.inf)
        ok &= (tk > 0) & (tk < best)
        if not ok.any():
            continue
        rel = o - centers[k]
        s = rel @ axes_u[k] + tk * (dirs @ axes_u[k])
        r = rel @ axes_v[k] + tk * (dirs @ axes_v[k])
        ok &= (np.abs(s) <= half_u[k]) & (np.abs(r) <= half_v[k])
        best[ok] = tk[ok]
        idx[ok] = k
        s_out[ok] = s[ok]
        r_out[ok] = r[ok]
    return best, idx, s_out, r_out
