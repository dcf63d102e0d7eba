"""Frames and keyframes shared by tracking and the keyframe window."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import build_pyramid
from .keypoints import PATTERN
from .rig import VIEWS


class Frame:
    """Five synchronised images with lazily built pyramids."""

    def __init__(self, images, levels=4, timestamp=0.0, index=0):
        if len(images) != len(VIEWS):
            raise ValueError(f"a frame needs {len(VIEWS)} images, got {len(images)}")
        self.images = [np.asarray(im, dtype=float) for im in images]
        self.levels = levels
        self.timestamp = timestamp
        self.index = index
        self._pyr = {}

    def pyramid(self, view):
        if view not in self._pyr:
            self._pyr[view] = build_pyramid(self.images[view - 1], self.levels)
        return self._pyr[view]

    def level(self, view, level):
        return self.pyramid(view)[level]


@dataclass
class HostLevel:
    """Pattern points of all keypoints of a keyframe at one pyramid level.

    Rows are (keypoint, pattern sample) pairs whose host intensity could
    be sampled.  ``cam_pts`` are in the host camera, ``body_pts`` in the
    keyframe body frame.
    """

    view: np.ndarray  # (N,) host view index
    kp: np.ndarray  # (N,) keypoint index within its view
    cam_pts: np.ndarray
    body_pts: np.ndarray
    ref: np.ndarray

    def __len__(self):
        return len(self.ref)

    def select(self, mask):
        return HostLevel(self.view[mask], self.kp[mask], self.cam_pts[mask],
                         self.body_pts[mask], self.ref[mask])


def level_pixels(uv, level):
    """Map finest-level pixel coordinates to pyramid ``level``."""
    s = 0.5 ** level
    return (np.asarray(uv, dtype=float) + 0.5) * s - 0.5


class Keyframe:
    """A frame promoted to the window: body pose, images and keypoints."""

    def __init__(self, id, frame, pose, keypoints, rig):
        self.id = id
        self.frame = frame
        self.timestamp = frame.timestamp
        self.pose = pose  # world_from_body
        self.keypoints = {v: list(keypoints.get(v, [])) for v in VIEWS}
        self.rig = rig
        self._levels = {}

    @property
    def num_keypoints(self):
        return sum(len(k) for k in self.keypoints.values())

    def host(self, level):
        if level not in self._levels:
            self._levels[level] = self._build(level)
        return self._levels[level]

    def _build(self, level):
        views, kps, cams, bodies, refs = [], [], [], [], []
        for v in VIEWS:
            pts = self.keypoints[v]
            if not pts:
                continue
            cam = self.rig.camera(v).scaled(level)
            uv = level_pixels(np.array([k.uv for k in pts]), level)
            d = np.array([k.depth for k in pts])
            pix = uv[:, None, :] + PATTERN[None, :, :]
            n, m = pix.shape[:2]
            pix = pix.reshape(-1, 2)
            dd = np.repeat(d, m)
            if level == 0:
                ref = np.concatenate([k.pattern for k in pts])
                ok = cam.contains(pix)
            else:
                ref, _, ok = self.frame.level(v, level).sample(pix)
            cp = cam.unproject_points(pix, dd)
            bp = self.rig.body_from_cam(v).apply(cp)
            views.append(np.full(ok.sum(), v))
            kps.append(np.repeat(np.arange(n), m)[ok])
            cams.append(cp[ok])
            bodies.append(bp[ok])
            refs.append(ref[ok])
        if not views:
            z = np.zeros((0, 3))
            return HostLevel(np.zeros(0, int), np.zeros(0, int), z, z, np.zeros(0))
        return HostLevel(np.concatenate(views), np.concatenate(kps), np.concatenate(cams),
                         np.concatenate(bodies), np.concatenate(refs))

    def with_pose(self, pose):
        kf = Keyframe(self.id, self.frame, pose, self.keypoints, self.rig)
        kf._levels = self._levels
        return kf
