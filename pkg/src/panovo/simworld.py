"""Deterministic synthetic world: textured rectangles, renders and LiDAR scans.

Frame conventions follow the cameras: x right, y down, z forward.  Patches
are vertical rectangles arranged in a ring around a centre point and
facing roughly inward, so every view of a rig inside the ring sees
texture.  Patch textures are sums of a few sinusoids that fade smoothly
into the background value near the patch border.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .association import LidarScan
from .errors import BadFrameCount
from .geometry import Pose
from .rig import VIEWS, yaw_rotation

BACKGROUND = 64.0
N_WAVES = 4
TAPER = 0.2  # fraction of each half-extent used to fade texture to background


@dataclass
class SimConfig:
    landmarks: int = 24
    texture_contrast: float = 100.0
    texture_base: float = 128.0
    min_wavelength: float = 0.8  # metres
    max_wavelength: float = 2.5
    centre: tuple = (0.0, 0.0, 0.0)
    inner_radius: float = 8.0
    outer_radius: float = 9.0
    # lidar
    lidar_rings: int = 32
    lidar_azimuths: int = 1024
    lidar_vfov: tuple = (-25.0, 25.0)  # degrees, positive is up
    lidar_hfov: float = 360.0
    max_range: float = 100.0
    range_noise: float = 0.0
    image_noise: float = 0.0
    # trajectory
    step: float = 0.1  # metres per frame
    yaw_rate: float = np.radians(85.0)  # peak per-frame yaw for fast-yaw
    yaw_accel: float = np.radians(4.0)  # per-frame change of the yaw rate while ramping up
    frame_dt: float = 0.2  # 5 fps

    def __post_init__(self):
        if self.landmarks < 0 or self.lidar_rings <= 0 or self.lidar_azimuths <= 0:
            raise ValueError("counts must be positive")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.range_noise < 0 or self.image_noise < 0:
            raise ValueError("noise levels must be non-negative")


@dataclass
class Patch:
    centre: np.ndarray
    normal: np.ndarray
    axis_u: np.ndarray  # horizontal, in-plane
    axis_v: np.ndarray  # vertical, in-plane
    half_u: float
    half_v: float
    base: float
    amps: np.ndarray  # (N_WAVES,)
    freqs: np.ndarray  # (N_WAVES, 2) cycles per metre along (u, v)
    phases: np.ndarray

    def texture(self, s, r):
        """Intensity at in-plane coordinates; includes the border fade."""
        s = np.asarray(s, dtype=float)
        r = np.asarray(r, dtype=float)
        wave = np.zeros(np.broadcast(s, r).shape)
        for a, (fu, fv), ph in zip(self.amps, self.freqs, self.phases):
            wave = wave + a * np.sin(2 * np.pi * (fu * s + fv * r) + ph)
        return BACKGROUND + _fade(s, self.half_u) * _fade(r, self.half_v) * (self.base - BACKGROUND + wave)


def _fade(x, half):
    a = np.clip((half - np.abs(x)) / (TAPER * half), 0.0, 1.0)
    return a * a * (3 - 2 * a)


@dataclass
class Scene:
    seed: int
    patches: list = field(default_factory=list)
    bounds: tuple = ((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))

    def arrays(self):
        """Stacked patch geometry for :func:`kernels.raycast`."""
        if not self.patches:
            z = np.zeros((0, 3))
            return z, z, z, z, np.zeros(0), np.zeros(0)
        return (np.array([p.centre for p in self.patches]),
                np.array([p.normal for p in self.patches]),
                np.array([p.axis_u for p in self.patches]),
                np.array([p.axis_v for p in self.patches]),
                np.array([p.half_u for p in self.patches]),
                np.array([p.half_v for p in self.patches]))


def make_patch(centre, normal, half_u, half_v, base=128.0, amps=(), freqs=(), phases=()):
    """Vertical rectangle facing ``normal`` (its y component is ignored)."""
    n = np.array(normal, dtype=float)
    n[1] = 0.0
    n /= np.linalg.norm(n)
    axis_v = np.array([0.0, 1.0, 0.0])
    axis_u = np.cross(axis_v, n)
    k = len(amps)
    return Patch(np.array(centre, dtype=float), n, axis_u, axis_v, float(half_u), float(half_v),
                 float(base), np.array(amps, dtype=float).reshape(k),
                 np.array(freqs, dtype=float).reshape(k, 2), np.array(phases, dtype=float).reshape(k))


def make_scene(seed, cfg):
    """Patches on a jittered convex ring, one per angular slot.

    Each patch fills part of its slot, so seen from inside the ring the
    patches rarely occlude one another and most image edges are texture.
    """
    rng = np.random.default_rng(seed)
    c = np.array(cfg.centre, dtype=float)
    n = cfg.landmarks
    slot = 2 * np.pi / max(n, 1)
    patches = []
    for k in range(n):
        ang = slot * (k + rng.uniform(-0.1, 0.1))
        rad = rng.uniform(cfg.inner_radius, cfg.outer_radius)
        out = np.array([np.sin(ang), 0.0, np.cos(ang)])
        centre = c + rad * out + np.array([0.0, rng.uniform(-0.5, 0.5), 0.0])
        normal = yaw_rotation(rng.uniform(-np.radians(15), np.radians(15))) @ -out
        half_u = rad * np.tan(slot / 2) * rng.uniform(0.6, 0.8)
        half_v = rng.uniform(1.5, 2.5)
        lam = rng.uniform(cfg.min_wavelength, cfg.max_wavelength, N_WAVES)
        direc = rng.uniform(0, np.pi, N_WAVES)
        freqs = np.stack([np.cos(direc), np.sin(direc)], axis=1) / lam[:, None]
        amps = cfg.texture_contrast * rng.uniform(0.5, 1.0, N_WAVES) / N_WAVES
        phases = rng.uniform(0, 2 * np.pi, N_WAVES)
        base = cfg.texture_base + rng.uniform(-20, 20)
        patches.append(make_patch(centre, normal, half_u, half_v, base, amps, freqs, phases))
    ext = cfg.outer_radius + 3.0
    return Scene(seed, patches, (tuple(c - ext), tuple(c + ext)))


def _shade(scene, t, idx, s, r):
    out = np.full(len(t), BACKGROUND)
    for k in np.unique(idx[idx >= 0]):
        m = idx == k
        out[m] = scene.patches[k].texture(s[m], r[m])
    return out


def cast(scene, origin, dirs):
    """Ray cast against all patches.  Returns ``(t, idx, s, r)``."""
    return kernels.raycast(np.asarray(origin, dtype=float), dirs, *scene.arrays())


def render_view(scene, cam, world_from_cam, noise=0.0, rng=None):
    vv, uu = np.mgrid[0:cam.height, 0:cam.width]
    d_cam = np.stack([(uu - cam.cx) / cam.fx, (vv - cam.cy) / cam.fy, np.ones(uu.shape)], axis=-1)
    dirs = d_cam.reshape(-1, 3) @ world_from_cam.R.T
    t, idx, s, r = cast(scene, world_from_cam.t, dirs)
    img = _shade(scene, t, idx, s, r)
    if noise > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        img = img + rng.normal(0.0, noise, img.shape)
    return img.reshape(cam.height, cam.width)


def render_frame(scene, rig, world_from_body, cfg, noise_seed=0):
    """Five images, one per view, in view order."""
    rng = np.random.default_rng([scene.seed, noise_seed]) if cfg.image_noise > 0 else None
    return [render_view(scene, rig.camera(v), world_from_body @ rig.body_from_cam(v),
                        cfg.image_noise, rng) for v in VIEWS]


def lidar_directions(cfg):
    el = np.radians(np.linspace(cfg.lidar_vfov[0], cfg.lidar_vfov[1], cfg.lidar_rings))
    hf = np.radians(cfg.lidar_hfov)
    az = -hf / 2 + hf * (np.arange(cfg.lidar_azimuths) + 0.5) / cfg.lidar_azimuths
    E, A = np.meshgrid(el, az, indexing="ij")
    # y points down, so positive elevation has negative y
    return np.stack([np.cos(E) * np.sin(A), -np.sin(E), np.cos(E) * np.cos(A)], axis=-1).reshape(-1, 3)


def simulate_lidar(scene, world_from_body, cfg, body_from_lidar=None, noise_seed=0, timestamp=0.0):
    world_from_lidar = world_from_body @ (body_from_lidar or Pose.identity())
    dirs = lidar_directions(cfg)
    t, idx, _, _ = cast(scene, world_from_lidar.t, dirs @ world_from_lidar.R.T)
    hit = (idx >= 0) & (t <= cfg.max_range)
    rng_ = t[hit]
    if cfg.range_noise > 0:
        rng = np.random.default_rng([scene.seed, noise_seed, 1])
        rng_ = rng_ + rng.normal(0.0, cfg.range_noise, rng_.shape)
    return LidarScan(dirs[hit] * rng_[:, None], timestamp)


# ---------------------------------------------------------------------------
# trajectories

TRAJECTORY_KINDS = ("line", "arc", "indoor-loop", "line-arc", "fast-yaw")


def _circle(n, step, total_angle):
    """Right-turning circular arc starting at the origin heading +z."""
    rho = step * (n - 1) / total_angle
    out = []
    for i in range(n):
        th = total_angle * i / (n - 1)
        out.append(Pose(yaw_rotation(th), rho * np.array([1 - np.cos(th), 0.0, np.sin(th)])))
    return out


def make_trajectory(kind, n, cfg=None):
    """Ground-truth body poses (world_from_body), starting at the identity.

    ``line`` moves along +x; ``arc`` turns 90 degrees while driving
    forward; ``indoor-loop`` drives one full circle; ``line-arc`` drives
    straight along +z for half the frames and then a 90 degree arc;
    ``fast-yaw`` drives forward while the heading rate ramps up to
    ``cfg.yaw_rate`` per frame in steps of at most ``cfg.yaw_accel``.
    """
    cfg = cfg or SimConfig()
    if n < 2:
        raise BadFrameCount(f"need at least 2 frames, got {n}")
    if kind == "line":
        return [Pose(np.eye(3), [cfg.step * i, 0.0, 0.0]) for i in range(n)]
    if kind == "arc":
        return _circle(n, cfg.step, np.pi / 2)
    if kind == "indoor-loop":
        return _circle(n, cfg.step, 2 * np.pi)
    if kind == "line-arc":
        n1 = n // 2
        straight = [Pose(np.eye(3), [0.0, 0.0, cfg.step * i]) for i in range(n1)]
        start = Pose(np.eye(3), [0.0, 0.0, cfg.step * (n1 - 1)])
        arc = _circle(n - n1 + 1, cfg.step, np.pi / 2)[1:]
        return straight + [start @ p for p in arc]
    if kind == "fast-yaw":
        out = [Pose.identity()]
        heading, pos = 0.0, np.zeros(3)
        ramp = max(1, int(np.ceil(cfg.yaw_rate / cfg.yaw_accel)))
        for i in range(1, n):
            rate = cfg.yaw_rate * min(1.0, i / ramp)
            mid = heading + rate / 2
            pos = pos + cfg.step * np.array([np.sin(mid), 0.0, np.cos(mid)])
            heading += rate
            out.append(Pose(yaw_rotation(heading), pos))
        return out
    raise ValueError(f"unknown trajectory kind {kind!r}; expected one of {TRAJECTORY_KINDS}")


def fit_scene_config(trajectory, cfg, clearance=2.5, spread=1.15):
    """Centre the landmark ring on ``trajectory`` with room to move inside it.

    The configured radii act as a floor so that texture wavelengths stay
    small relative to the patches.
    """
    pos = np.array([p.t for p in trajectory])
    c = 0.5 * (pos.min(axis=0) + pos.max(axis=0))
    c[1] = 0.0
    reach = float(np.max(np.linalg.norm((pos - c)[:, [0, 2]], axis=1)))
    inner = max(reach + clearance, cfg.inner_radius)
    return replace(cfg, centre=tuple(c), inner_radius=inner, outer_radius=max(inner * spread, cfg.outer_radius))
