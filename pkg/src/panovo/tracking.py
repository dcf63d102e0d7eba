"""Direct tracking of the current body frame against the newest keyframe.

Every keyframe keypoint hosted in view ``j`` is warped into every active
view ``l`` of the current frame.  The single unknown is the relative body
pose ``T_k1_c1`` (keyframe body -> current body); each of the 25 pair
poses follows from it through the rig extrinsics.  The robust energy is
minimised by iteratively reweighted Gauss-Newton, coarse to fine.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import Diverged, InsufficientResiduals
from .geometry import Pose, se3_exp
from .rig import NUM_VIEWS, VIEWS, chain_tracking


MAX_HALVINGS = 10
DIVERGENCE_FACTOR = 4.0


@dataclass
class TrackingConfig:
    huber: float = 9.0
    levels: int = 4
    max_iterations: int = 20
    step_tolerance: float = 1e-6
    min_valid: int = 50
    cross_view: bool = True
    views: tuple = VIEWS
    # target gradient (intensity/px) a residual needs to constrain the pose
    min_gradient: float = 2.0

    def __post_init__(self):
        self.views = tuple(sorted(set(int(v) for v in self.views)))
        if self.huber <= 0:
            raise ValueError("huber threshold must be positive")
        if self.levels < 1:
            raise ValueError("need at least one pyramid level")
        if not self.views or not set(self.views) <= set(VIEWS):
            raise ValueError(f"active views must be a non-empty subset of {VIEWS}")


@dataclass
class EnergyDiagnostics:
    valid: int
    informative: int
    total: int
    pair_counts: np.ndarray  # (5, 5), [host j - 1, target l - 1]
    host_covered: np.ndarray = field(repr=False, default=None)  # per host residual


@dataclass
class TrackResult:
    T_k1_c1: Pose
    energy: float
    valid: int
    pair_counts: np.ndarray
    mean_flow: float
    residual_ratio: float
    converged: bool
    energies: list = field(default_factory=list)  # accepted energies, finest level
    iterations: int = 0


def huber_cost(r, gamma):
    """Robust cost: ``r^2`` inside ``gamma``, ``gamma (2|r| - gamma)`` outside."""
    a = np.abs(np.asarray(r, dtype=float))
    return np.where(a <= gamma, a * a, gamma * (2.0 * a - gamma))


def huber_weight(r, gamma):
    a = np.abs(np.asarray(r, dtype=float))
    return np.where(a <= gamma, 1.0, gamma / np.maximum(a, gamma))


def _cam_tuple(cam):
    return (cam.fx, cam.fy, cam.cx, cam.cy)


def _targets(j, cfg):
    return cfg.views if cfg.cross_view else (j,)


def evaluate_energy(keyframe, frame, T, rig, cfg, level=0, check=True):
    """Robust photometric energy of ``T`` with per view-pair bookkeeping.

    Each (host, target) pair is evaluated with its own chained pose, so
    this path is independent of the body-frame form used by the solver.
    """
    host = keyframe.host(level)
    counts = np.zeros((NUM_VIEWS, NUM_VIEWS), dtype=int)
    covered = np.zeros(len(host), dtype=bool)
    energy, valid, informative, total = 0.0, 0, 0, 0
    for j in cfg.views:
        sel = np.nonzero(host.view == j)[0]
        if not len(sel):
            continue
        total += len(sel)
        for l in _targets(j, cfg):
            pair = chain_tracking(rig, T, j, l)
            lv = frame.level(l, level)
            res, _, ok, gn = kernels.photometric_residuals(
                host.cam_pts[sel], host.ref[sel], pair.R, pair.t,
                _cam_tuple(rig.camera(l).scaled(level)), lv.img, lv.gx, lv.gy)
            energy += float(huber_cost(res[ok], cfg.huber).sum())
            n = int(ok.sum())
            counts[j - 1, l - 1] = n
            valid += n
            informative += int(np.count_nonzero(gn[ok] > cfg.min_gradient))
            covered[sel[ok]] = True
    diag = EnergyDiagnostics(valid, informative, total, counts, covered)
    if check and valid < cfg.min_valid:
        raise InsufficientResiduals(f"{valid} valid residuals < {cfg.min_valid}")
    return energy, diag


def _active_hosts(host, cfg):
    if len(cfg.views) == NUM_VIEWS:
        return host
    return host.select(np.isin(host.view, cfg.views))


def accumulate(keyframe, frame, T, rig, cfg, level):
    """Normal equations in the body-pose twist (left perturbation of ``T``)."""
    host = _active_hosts(keyframe.host(level), cfg)
    q = T.apply(host.body_pts)
    H = np.zeros((6, 6))
    b = np.zeros(6)
    energy, valid, informative = 0.0, 0, 0
    for l in cfg.views:
        m = slice(None) if cfg.cross_view else host.view == l
        ql = q[m]
        if not len(ql):
            continue
        A = rig.cam_from_body(l)
        lv = frame.level(l, level)
        e, Hl, bl, nv, ni = kernels.photometric_accumulate(
            ql, host.ref[m], A.R, A.t, _cam_tuple(rig.camera(l).scaled(level)),
            lv.img, lv.gx, lv.gy, cfg.huber, cfg.min_gradient)
        energy += e
        H += Hl
        b += bl
        valid += nv
        informative += ni
    return energy, H, b, valid, informative


def solve_step(H, b):
    """Gauss-Newton step ``H dx = -b`` with a tiny diagonal guard."""
    scale = max(float(np.max(np.abs(np.diag(H)))), 1e-12)
    A = H + 1e-10 * scale * np.eye(len(b))
    try:
        return np.linalg.solve(A, -b)
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(A, -b, rcond=None)[0]


def _flow(keyframe, T, rig, cfg):
    """Mean pixel displacement of same-view keypoint centres."""
    flows = []
    for j in cfg.views:
        pts = keyframe.keypoints[j]
        if not pts:
            continue
        cam = rig.camera(j)
        uv = np.array([k.uv for k in pts])
        p = cam.unproject_points(uv, np.array([k.depth for k in pts]))
        uv2, front = cam.project_points(chain_tracking(rig, T, j, j).apply(p))
        ok = front & cam.contains(uv2)
        flows.append(np.linalg.norm(uv2[ok] - uv[ok], axis=1))
    f = np.concatenate(flows) if flows else np.zeros(0)
    return float(f.mean()) if len(f) else float("inf")


def _optimize_level(keyframe, frame, T, rig, cfg, level, trace):
    energy, H, b, valid, _ = accumulate(keyframe, frame, T, rig, cfg, level)
    if valid < cfg.min_valid:
        return T, energy, False, 0
    trace.append(energy)
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        dx = solve_step(H, b)
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            T_new = (se3_exp(lam * dx) @ T).normalized()
            e_new, H_new, b_new, v_new, _ = accumulate(keyframe, frame, T_new, rig, cfg, level)
            if v_new >= cfg.min_valid and e_new <= energy:
                break
            lam *= 0.5
        else:
            converged = True  # no descent left along the GN direction
            break
        T, energy, H, b = T_new, e_new, H_new, b_new
        trace.append(energy)
        if lam * np.linalg.norm(dx) < cfg.step_tolerance:
            converged = True
            break
    return T, energy, converged, it


def track_frame(keyframe, frame, T_init, rig, cfg=None):
    """Estimate ``T_k1_c1`` (keyframe body -> current body)."""
    cfg = cfg or TrackingConfig()
    levels = min(cfg.levels, frame.levels)
    e0, diag0 = evaluate_energy(keyframe, frame, T_init, rig, cfg, level=0)
    if diag0.informative < cfg.min_valid:
        raise InsufficientResiduals(
            f"only {diag0.informative} residuals land on textured pixels (< {cfg.min_valid})")

    T = T_init
    converged = False
    iterations = 0
    trace = []
    for level in reversed(range(levels)):
        trace = []
        T, _, converged, its = _optimize_level(keyframe, frame, T, rig, cfg, level, trace)
        iterations += its

    energy, diag = evaluate_energy(keyframe, frame, T, rig, cfg, level=0)
    if diag.informative < cfg.min_valid:
        raise InsufficientResiduals(f"only {diag.informative} informative residuals after tracking")
    if energy > DIVERGENCE_FACTOR * e0 and energy > 0:
        raise Diverged(f"energy {energy:.3g} exceeds {DIVERGENCE_FACTOR}x initial {e0:.3g}")
    ratio = float(diag.host_covered.sum()) / max(diag.total, 1)
    return TrackResult(T, energy, diag.valid, diag.pair_counts, _flow(keyframe, T, rig, cfg),
                       ratio, converged, trace, iterations)


def constant_velocity_guess(world_from_prev2, world_from_prev, world_from_kf):
    """Initial ``T_k1_c1`` assuming the last inter-frame motion repeats."""
    if world_from_prev2 is None:
        pred = world_from_prev
    else:
        pred = world_from_prev @ (world_from_prev2.inverse() @ world_from_prev)
    return pred.inverse() @ world_from_kf
