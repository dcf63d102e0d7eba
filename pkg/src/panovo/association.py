"""LiDAR-to-pixel depth association.

Each scan point is moved into a camera, projected, and binned into a grid
of ``cell_size`` pixel cells.  Only the nearest point (smallest camera
depth) survives in each cell, which removes most points seen through
foreground surfaces.  Depths are never interpolated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyScan, ParseError
from .rig import VIEWS

DEFAULT_CELL_SIZE = 2.0


@dataclass
class LidarScan:
    points: np.ndarray  # (N, 3) in the LiDAR frame, metres
    timestamp: float = 0.0

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)

    def __len__(self):
        return len(self.points)


@dataclass(eq=False)
class SparseDepthMap:
    view: int
    cell_size: float
    cells: dict  # (cx, cy) -> (pixel ndarray(2), depth)
    _tree: object = field(default=None, repr=False)

    def __post_init__(self):
        if self.cells:
            keys = sorted(self.cells)
            self.pixels = np.array([self.cells[k][0] for k in keys])
            self.depths = np.array([self.cells[k][1] for k in keys])
        else:
            self.pixels = np.zeros((0, 2))
            self.depths = np.zeros(0)

    def __len__(self):
        return len(self.cells)

    @property
    def tree(self):
        if self._tree is None and len(self.pixels):
            self._tree = cKDTree(self.pixels)
        return self._tree

    def lookup_many(self, uv, radius):
        """Vectorised :func:`depth_lookup`; missing entries are NaN."""
        uv = np.asarray(uv, dtype=float).reshape(-1, 2)
        out = np.full(len(uv), np.nan)
        if not len(self.pixels) or not len(uv):
            return out
        dist, idx = self.tree.query(uv, k=1, distance_upper_bound=radius + 1e-12)
        hit = np.isfinite(dist) & (dist <= radius)
        out[hit] = self.depths[idx[hit]]
        return out


def build_sparse_depth(scan, rig, view, body_from_lidar, cell_size=DEFAULT_CELL_SIZE):
    """Assign LiDAR depths to pixels of one view."""
    if len(scan) == 0:
        raise EmptyScan("scan has no points")
    cam = rig.camera(view)
    cam_from_lidar = rig.cam_from_body(view) @ body_from_lidar
    p = cam_from_lidar.apply(scan.points)
    uv, front = cam.project_points(p)
    keep = front & cam.contains(uv)
    uv, z = uv[keep], p[keep, 2]

    cells = {}
    if len(z):
        cell = np.floor(uv / cell_size).astype(np.int64)
        ncols = int(np.ceil(cam.width / cell_size)) + 1
        cid = cell[:, 1] * ncols + cell[:, 0]
        # nearest point first within each cell; index breaks exact ties
        order = np.lexsort((np.arange(len(z)), z, cid))
        first = np.ones(len(order), dtype=bool)
        first[1:] = cid[order[1:]] != cid[order[:-1]]
        for i in order[first]:
            cells[(int(cell[i, 0]), int(cell[i, 1]))] = (uv[i].copy(), float(z[i]))
    return SparseDepthMap(view, float(cell_size), cells)


def build_all_views(scan, rig, body_from_lidar, cell_size=DEFAULT_CELL_SIZE, views=VIEWS):
    return {v: build_sparse_depth(scan, rig, v, body_from_lidar, cell_size) for v in views}


def depth_lookup(depth_map, u, radius):
    """Depth of the nearest stored sample within ``radius`` pixels, else None."""
    if radius < 0:
        raise ValueError("radius must be non-negative")
    d = depth_map.lookup_many(np.asarray(u, dtype=float)[None, :], radius)[0]
    return None if np.isnan(d) else float(d)


def read_scan(path, timestamp=0.0):
    pts = []
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"{path}:{lineno}: expected 'x y z'")
            try:
                pts.append([float(x) for x in parts])
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    pts = np.array(pts, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(pts)):
        raise ParseError(f"{path}: non-finite coordinates")
    return LidarScan(pts, timestamp)


def write_scan(path, scan):
    np.savetxt(path, scan.points, fmt="%.6f")
