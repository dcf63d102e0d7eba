"""Block-wise selection of high-gradient pixels that carry LiDAR depth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import central_gradients

# Residual pattern shared by tracking and bundle adjustment: eight samples
# spread around the host pixel, offsets in pixels of the sampled level.
PATTERN = np.array([
    [0, -2], [-1, -1], [1, -1], [-2, 0], [0, 0], [2, 0], [-1, 1], [0, 2],
], dtype=float)
PATTERN_RADIUS = 2
PATTERN_SIZE = len(PATTERN)


@dataclass
class KeypointConfig:
    block_size: int = 32
    grad_offset: float = 7.0
    depth_radius: float = 2.0
    max_points: int = 400

    def __post_init__(self):
        if self.block_size < 1 or self.max_points < 0 or self.depth_radius < 0:
            raise ValueError("invalid keypoint configuration")


@dataclass
class Keypoint:
    view: int
    uv: np.ndarray
    depth: float
    pattern: np.ndarray  # host intensities at uv + PATTERN
    gradient: float = 0.0


def gradient_magnitude(img):
    gx, gy = central_gradients(img)
    return np.hypot(gx, gy)


def block_thresholds(grad, block_size, offset):
    """Per-block adaptive threshold: block median gradient plus ``offset``."""
    h, w = grad.shape
    nby, nbx = -(-h // block_size), -(-w // block_size)
    thr = np.empty((nby, nbx))
    for by in range(nby):
        for bx in range(nbx):
            blk = grad[by * block_size:(by + 1) * block_size, bx * block_size:(bx + 1) * block_size]
            thr[by, bx] = np.median(blk) + offset
    return thr


def select_keypoints(img, depth_map, cfg=None, view=None):
    """Pick at most one keypoint per block.

    Within a block, candidates are pixels whose gradient magnitude reaches
    the block threshold, visited strongest first; the first one with a
    LiDAR depth inside ``cfg.depth_radius`` wins.
    """
    cfg = cfg or KeypointConfig()
    img = np.asarray(img, dtype=float)
    view = depth_map.view if view is None else view
    h, w = img.shape
    grad = gradient_magnitude(img)
    bs = cfg.block_size
    thr = block_thresholds(grad, bs, cfg.grad_offset)

    # keypoint and its full pattern must stay clear of the gradient border
    margin = PATTERN_RADIUS + 1
    vv, uu = np.mgrid[0:h, 0:w]
    inner = (uu >= margin) & (uu <= w - 1 - margin) & (vv >= margin) & (vv <= h - 1 - margin)
    cand = inner & (grad >= thr[vv // bs, uu // bs]) & (grad > 0)
    cv, cu = np.nonzero(cand)
    if not len(cu):
        return []
    d = depth_map.lookup_many(np.stack([cu, cv], axis=1).astype(float), cfg.depth_radius)
    has = ~np.isnan(d)
    cu, cv, d = cu[has], cv[has], d[has]
    g = grad[cv, cu]
    block = (cv // bs) * thr.shape[1] + (cu // bs)
    # strongest first per block, ties broken by raster order for determinism
    order = np.lexsort((cv * w + cu, -g, block))
    first = np.ones(len(order), dtype=bool)
    first[1:] = block[order[1:]] != block[order[:-1]]
    chosen = order[first]
    if len(chosen) > cfg.max_points:
        keep = np.lexsort((block[chosen], -g[chosen]))[:cfg.max_points]
        chosen = np.sort(chosen[keep])

    out = []
    for i in chosen:
        uv = np.array([float(cu[i]), float(cv[i])])
        px = (uv + PATTERN).astype(int)
        out.append(Keypoint(view, uv, float(d[i]), img[px[:, 1], px[:, 0]].copy(), float(g[i])))
    return out
