"""Rigid transforms, the pinhole camera pair and image sampling.

Transform naming: a pose called ``b_from_a`` maps coordinates expressed in
frame ``a`` into frame ``b``.  Composition reads right to left, so
``c_from_a = c_from_b @ b_from_a``.

Images are 2-D ``float64`` arrays indexed ``[row, col]`` (``[v, u]``).
Pixel coordinates put integer values at pixel centres.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BehindCamera,
    NearSingularRotation,
    NonPositiveDepth,
    OutOfBounds,
    ParseError,
)

_SMALL_ANGLE = 1e-3
# the V^-1 coefficient of the log cancels badly well above _SMALL_ANGLE;
# its four-term series is exact to ~2e-16 up to this angle
_LOG_SERIES_ANGLE = 0.1
_PI_GUARD = 1e-9


def hat(w):
    """3-vector to its skew-symmetric cross-product matrix."""
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def _rodrigues_coeffs(theta):
    # A = sin(t)/t, B = (1-cos t)/t^2, C = (t - sin t)/t^3
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        s = np.sin(theta)
        a = s / theta
        b = 2.0 * np.sin(0.5 * theta) ** 2 / (theta * theta)
        c = (theta - s) / (theta ** 3)
    return a, b, c


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform ``x -> R x + t``."""

    R: np.ndarray = field(default_factory=lambda: np.eye(3))
    t: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.R, dtype=float).reshape(3, 3)
        t = np.array(self.t, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "t", t)

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_matrix(cls, T):
        T = np.asarray(T, dtype=float)
        if T.shape != (4, 4):
            raise ValueError(f"expected a 4x4 matrix, got {T.shape}")
        return cls(T[:3, :3], T[:3, 3])

    def matrix(self):
        T = np.eye(4)
        T[:3, :3] = self.R
        T[:3, 3] = self.t
        return T

    def inverse(self):
        Rt = self.R.T
        return Pose(Rt, -Rt @ self.t)

    def __matmul__(self, other):
        if isinstance(other, Pose):
            return Pose(self.R @ other.R, self.R @ other.t + self.t)
        return NotImplemented

    def apply(self, points):
        """Transform a 3-vector or an ``(N, 3)`` array of points."""
        p = np.asarray(points, dtype=float)
        return p @ self.R.T + self.t

    def normalized(self):
        """Project the rotation back onto SO(3) (drift after long products)."""
        u, _, vt = np.linalg.svd(self.R)
        R = u @ vt
        if np.linalg.det(R) < 0:
            u[:, -1] *= -1
            R = u @ vt
        return Pose(R, self.t)

    def is_valid(self, tol=1e-9):
        return (np.allclose(self.R.T @ self.R, np.eye(3), atol=tol)
                and abs(np.linalg.det(self.R) - 1.0) < tol
                and np.all(np.isfinite(self.t)))

    def allclose(self, other, atol=1e-9):
        return (np.allclose(self.R, other.R, atol=atol)
                and np.allclose(self.t, other.t, atol=atol))

    def __repr__(self):
        return f"Pose(R={self.R.tolist()}, t={self.t.tolist()})"


def so3_exp(w):
    w = np.asarray(w, dtype=float)
    theta = float(np.linalg.norm(w))
    a, b, _ = _rodrigues_coeffs(theta)
    W = hat(w)
    return np.eye(3) + a * W + b * (W @ W)


def so3_log(R):
    R = np.asarray(R, dtype=float)
    vee = np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = 0.5 * np.linalg.norm(vee)
    c = 0.5 * (np.trace(R) - 1.0)
    theta = float(np.arctan2(s, c))
    if theta > np.pi - _PI_GUARD:
        raise NearSingularRotation(f"rotation angle {theta!r} is at pi; log is not unique")
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        scale = 0.5 * (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0)
    else:
        scale = 0.5 * theta / np.sin(theta)
    return scale * vee


def se3_exp(twist):
    """Exponential map.  ``twist`` is ``(omega, v)``: rotation first."""
    xi = np.asarray(twist, dtype=float).reshape(6)
    w, v = xi[:3], xi[3:]
    theta = float(np.linalg.norm(w))
    a, b, c = _rodrigues_coeffs(theta)
    W = hat(w)
    W2 = W @ W
    R = np.eye(3) + a * W + b * W2
    V = np.eye(3) + b * W + c * W2
    return Pose(R, V @ v)


def se3_log(pose):
    """Inverse of :func:`se3_exp`; raises NearSingularRotation at angle pi."""
    w = so3_log(pose.R)
    theta = float(np.linalg.norm(w))
    W = hat(w)
    if theta < _LOG_SERIES_ANGLE:
        t2 = theta * theta
        k = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0 + t2 ** 3 / 1209600.0
    else:
        k = (1.0 - theta * np.sin(theta) / (2.0 * (1.0 - np.cos(theta)))) / (theta * theta)
    V_inv = np.eye(3) - 0.5 * W + k * (W @ W)
    return np.concatenate([w, V_inv @ pose.t])


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics plus image size (pixels)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @property
    def K(self):
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    def scaled(self, level):
        """Intrinsics of pyramid ``level`` (each level halves resolution)."""
        if level == 0:
            return self
        s = 0.5 ** level
        return CameraModel(self.fx * s, self.fy * s,
                           (self.cx + 0.5) * s - 0.5, (self.cy + 0.5) * s - 0.5,
                           self.width >> level, self.height >> level)

    def project_points(self, p):
        """Vectorised projection; returns ``(uv, z_positive_mask)``."""
        p = np.asarray(p, dtype=float)
        z = p[..., 2]
        ok = z > 0
        zs = np.where(ok, z, 1.0)
        uv = np.stack([self.fx * p[..., 0] / zs + self.cx,
                       self.fy * p[..., 1] / zs + self.cy], axis=-1)
        return uv, ok

    def unproject_points(self, uv, d):
        uv = np.asarray(uv, dtype=float)
        d = np.asarray(d, dtype=float)
        x = (uv[..., 0] - self.cx) / self.fx * d
        y = (uv[..., 1] - self.cy) / self.fy * d
        return np.stack([x, y, d * np.ones_like(x)], axis=-1)

    def contains(self, uv, margin=0.0):
        uv = np.asarray(uv, dtype=float)
        return ((uv[..., 0] >= margin) & (uv[..., 0] <= self.width - 1 - margin)
                & (uv[..., 1] >= margin) & (uv[..., 1] <= self.height - 1 - margin))


def project(cam, p_cam):
    p = np.asarray(p_cam, dtype=float)
    if not p[2] > 0:
        raise NonPositiveDepth(f"point depth {p[2]!r} <= 0")
    return np.array([cam.fx * p[0] / p[2] + cam.cx, cam.fy * p[1] / p[2] + cam.cy])


def unproject(cam, u, d):
    if not d > 0:
        raise NonPositiveDepth(f"depth {d!r} <= 0")
    return cam.unproject_points(np.asarray(u, dtype=float), float(d))


def warp_pixel(cam_src, cam_dst, dst_from_src, u, d):
    """Move pixel ``u`` with depth ``d`` from one camera into another.

    The result is not bounds-checked.
    """
    p = dst_from_src.apply(unproject(cam_src, u, d))
    if not p[2] > 0:
        raise BehindCamera(f"transformed depth {p[2]!r} <= 0")
    return project(cam_dst, p)


# ---------------------------------------------------------------------------
# images


def central_gradients(img):
    """Central-difference gradient images; border rows/columns are zero.

    Interpolating these bilinearly with the weights used for the
    intensity gives exactly ``(I(u+1,v) - I(u-1,v)) / 2`` of the
    interpolated surface, so the two formulations are interchangeable.
    """
    img = np.asarray(img, dtype=float)
    gx = np.zeros_like(img)
    gy = np.zeros_like(img)
    gx[:, 1:-1] = 0.5 * (img[:, 2:] - img[:, :-2])
    gy[1:-1, :] = 0.5 * (img[2:, :] - img[:-2, :])
    return gx, gy


def sample_many(img, gx, gy, uv):
    """Bilinear intensity and gradient at many points.

    Returns ``(values, grads (N, 2), valid)``; invalid entries are zero.
    The valid region is ``[1, w-2] x [1, h-2]``.
    """
    h, w = img.shape
    uv = np.asarray(uv, dtype=float).reshape(-1, 2)
    x, y = uv[:, 0], uv[:, 1]
    valid = (x >= 1.0) & (x <= w - 2.0) & (y >= 1.0) & (y <= h - 2.0)
    xs = np.where(valid, x, 1.0)
    ys = np.where(valid, y, 1.0)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w - 3)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h - 3)
    ax = xs - x0
    ay = ys - y0
    w00 = (1 - ax) * (1 - ay)
    w01 = ax * (1 - ay)
    w10 = (1 - ax) * ay
    w11 = ax * ay

    def interp(a):
        return (w00 * a[y0, x0] + w01 * a[y0, x0 + 1]
                + w10 * a[y0 + 1, x0] + w11 * a[y0 + 1, x0 + 1])

    vals = np.where(valid, interp(img), 0.0)
    grads = np.stack([interp(gx), interp(gy)], axis=-1)
    grads[~valid] = 0.0
    return vals, grads, valid


def sample_bilinear(img, u):
    """Intensity and central-difference gradient at one sub-pixel location."""
    img = np.asarray(img, dtype=float)
    u = np.asarray(u, dtype=float)
    h, w = img.shape
    if not (np.all(np.isfinite(u)) and 1.0 <= u[0] <= w - 2.0 and 1.0 <= u[1] <= h - 2.0):
        raise OutOfBounds(f"pixel {u.tolist()} outside sampling region of {w}x{h} image")

    def bil(x, y):
        x0 = min(int(np.floor(x)), w - 2)
        y0 = min(int(np.floor(y)), h - 2)
        ax, ay = x - x0, y - y0
        return ((1 - ax) * (1 - ay) * img[y0, x0] + ax * (1 - ay) * img[y0, x0 + 1]
                + (1 - ax) * ay * img[y0 + 1, x0] + ax * ay * img[y0 + 1, x0 + 1])

    x, y = float(u[0]), float(u[1])
    val = bil(x, y)
    g = np.array([0.5 * (bil(x + 1, y) - bil(x - 1, y)),
                  0.5 * (bil(x, y + 1) - bil(x, y - 1))])
    return val, g


def downsample(img):
    """Halve resolution by 2x2 block averaging (odd trailing row/col dropped)."""
    h, w = img.shape
    h2, w2 = h // 2, w // 2
    a = img[:2 * h2, :2 * w2]
    return 0.25 * (a[0::2, 0::2] + a[1::2, 0::2] + a[0::2, 1::2] + a[1::2, 1::2])


class ImageLevel:
    """One pyramid level: intensities and their gradient images."""

    __slots__ = ("img", "gx", "gy")

    def __init__(self, img):
        self.img = np.ascontiguousarray(img, dtype=float)
        self.gx, self.gy = central_gradients(self.img)

    @property
    def shape(self):
        return self.img.shape

    def sample(self, uv):
        return sample_many(self.img, self.gx, self.gy, uv)


def build_pyramid(img, levels):
    out = [ImageLevel(img)]
    for _ in range(1, levels):
        out.append(ImageLevel(downsample(out[-1].img)))
    return out


# ---------------------------------------------------------------------------
# PGM io


def read_pgm(path):
    """Load a binary 8-bit (or 16-bit) grayscale PGM as float64."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:2] != b"P5":
        raise ParseError(f"{path}: not a binary PGM (magic {data[:2]!r})")
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError(f"{path}: truncated header")
        tokens.append(data[start:pos])
    pos += 1
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise ParseError(f"{path}: bad header {tokens!r}") from exc
    dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
    n = w * h * np.dtype(dtype).itemsize
    if len(data) - pos < n:
        raise ParseError(f"{path}: expected {n} bytes of pixels, got {len(data) - pos}")
    return np.frombuffer(data, dtype=dtype, count=w * h, offset=pos).reshape(h, w).astype(float)


def write_pgm(path, img):
    a = np.clip(np.rint(np.asarray(img, dtype=float)), 0, 255).astype(np.uint8)
    h, w = a.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(a.tobytes())
