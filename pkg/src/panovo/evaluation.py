"""Trajectory IO, rigid alignment and absolute translational error."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .errors import DegenerateAlignment, NoAssociations, ParseError
from .geometry import Pose

ASSOCIATION_TOLERANCE = 0.02  # seconds
COLLINEAR_TOL = 1e-9  # relative to the largest singular value of centred positions


@dataclass
class Trajectory:
    """Timestamped body poses (world_from_body) with increasing timestamps."""

    timestamps: np.ndarray
    poses: list = field(default_factory=list)

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=float).reshape(-1)
        self.poses = list(self.poses)
        if len(self.timestamps) != len(self.poses):
            raise ValueError("one timestamp per pose")
        if len(self.poses) == 0:
            raise ValueError("trajectory needs at least one pose")
        if np.any(np.diff(self.timestamps) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self):
        return len(self.poses)

    @property
    def positions(self):
        return np.array([p.t for p in self.poses])

    def transformed(self, T):
        """Left-multiply every pose by ``T``."""
        return Trajectory(self.timestamps, [T @ p for p in self.poses])

    def path_length(self):
        return float(np.linalg.norm(np.diff(self.positions, axis=0), axis=1).sum())


def associate(est, gt, tol=ASSOCIATION_TOLERANCE):
    """Index pairs matching each estimate to its nearest ground-truth stamp."""
    j = np.searchsorted(gt.timestamps, est.timestamps)
    lo = np.clip(j - 1, 0, len(gt) - 1)
    hi = np.clip(j, 0, len(gt) - 1)
    pick = np.where(np.abs(gt.timestamps[lo] - est.timestamps) <= np.abs(gt.timestamps[hi] - est.timestamps),
                    lo, hi)
    ok = np.abs(gt.timestamps[pick] - est.timestamps) <= tol
    return np.nonzero(ok)[0], pick[ok]


def _matched(est, gt, tol):
    i, j = associate(est, gt, tol)
    if len(i) == 0:
        raise NoAssociations("no estimate lies within the timestamp tolerance of the ground truth")
    return est.positions[i], gt.positions[j]


def align_points(P, Q):
    """Rigid ``(R, t)`` minimising ``sum |R p + t - q|^2`` (no scale)."""
    P = np.asarray(P, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if len(P) < 3:
        raise DegenerateAlignment(f"need at least 3 associated positions, got {len(P)}")
    mp, mq = P.mean(axis=0), Q.mean(axis=0)
    Pc, Qc = P - mp, Q - mq
    for X in (Pc, Qc):
        s = np.linalg.svd(X, compute_uv=False)
        if s[0] == 0 or s[1] <= COLLINEAR_TOL * s[0]:
            raise DegenerateAlignment("associated positions are collinear")
    U, _, Vt = np.linalg.svd(Qc.T @ Pc)
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    R = U @ D @ Vt
    return Pose(R, mq - R @ mp)


def umeyama_align(est, gt, tol=ASSOCIATION_TOLERANCE):
    """Rigid transform taking estimated positions onto the ground truth."""
    return align_points(*_matched(est, gt, tol))


def ate_rmse(est, gt, tol=ASSOCIATION_TOLERANCE):
    P, Q = _matched(est, gt, tol)
    T = align_points(P, Q)
    err = T.apply(P) - Q
    return float(np.sqrt(np.mean(np.sum(err * err, axis=1))))


# ---------------------------------------------------------------------------
# files

def read_trajectory(path):
    stamps, poses = [], []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 8:
                raise ParseError(f"{path}:{ln}: expected 8 fields, got {len(parts)}")
            try:
                v = [float(x) for x in parts]
            except ValueError as e:
                raise ParseError(f"{path}:{ln}: {e}") from None
            q = np.array(v[4:])
            if not np.all(np.isfinite(v)) or np.linalg.norm(q) < 1e-12:
                raise ParseError(f"{path}:{ln}: invalid pose")
            stamps.append(v[0])
            poses.append(Pose(Rotation.from_quat(q).as_matrix(), v[1:4]))
    if not poses:
        raise ParseError(f"{path}: no poses")
    try:
        return Trajectory(stamps, poses)
    except ValueError as e:
        raise ParseError(f"{path}: {e}") from None


def write_trajectory(path, traj):
    with open(path, "w") as fh:
        fh.write("# timestamp tx ty tz qx qy qz qw\n")
        for ts, p in zip(traj.timestamps, traj.poses):
            q = Rotation.from_matrix(p.R).as_quat()
            fh.write(" ".join(f"{x:.9f}" for x in (ts, *p.t, *q)) + "\n")


def plot_svg(path, est, gt=None, size=480, margin=20):
    """Top-down (x, z) path plot; the estimate is aligned when ``gt`` is given."""
    if gt is not None:
        try:
            est = est.transformed(umeyama_align(est, gt))
        except (DegenerateAlignment, NoAssociations):
            pass
    series = [("#d62728", est.positions)]
    if gt is not None:
        series.insert(0, ("#1f77b4", gt.positions))
    xz = np.concatenate([p[:, [0, 2]] for _, p in series])
    lo, hi = xz.min(axis=0), xz.max(axis=0)
    scale = (size - 2 * margin) / max(float(np.max(hi - lo)), 1e-9)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<rect width="{size}" height="{size}" fill="white"/>']
    for colour, pos in series:
        x = margin + (pos[:, 0] - lo[0]) * scale
        y = size - margin - (pos[:, 2] - lo[1]) * scale  # forward is up
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
