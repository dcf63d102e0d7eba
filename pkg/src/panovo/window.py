"""Sliding-window photometric bundle adjustment over keyframe body poses.

Residuals only connect the same view of two different keyframes.  Depths
come from LiDAR and stay fixed, so the unknowns are the body poses alone.
Evicted keyframes are folded into a quadratic prior by Schur complement.

Quadratic forms follow ``E(dx) ~ E0 + 2 b^T dx + dx^T H dx`` with
``H = sum w J^T J`` and ``b = sum w J^T r``; a Gauss-Newton step solves
``H dx = -b``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import Diverged, WindowNotFull, WindowTooSmall
from .frames import Keyframe
from .geometry import se3_exp, se3_log
from .rig import VIEWS
from .tracking import DIVERGENCE_FACTOR, MAX_HALVINGS, solve_step

__all__ = [
    "Keyframe", "KeyframeWindow", "MarginalPrior", "WindowConfig", "ba_energy",
    "keyframe_decision", "marginalize_oldest", "optimize_window", "schur_marginalize",
]


@dataclass
class WindowConfig:
    huber: float = 9.0
    max_iterations: int = 8
    flow_threshold: float = 8.0
    min_ratio: float = 0.6
    max_size: int = 7
    step_tolerance: float = 1e-6
    views: tuple = VIEWS

    def __post_init__(self):
        if self.huber <= 0 or self.flow_threshold <= 0 or self.min_ratio <= 0:
            raise ValueError("window thresholds must be positive")
        if self.max_size < 2:
            raise ValueError("window must hold at least two keyframes")


@dataclass
class MarginalPrior:
    ids: list  # keyframe ids the prior acts on, in block order
    H: np.ndarray
    b: np.ndarray
    lin: list  # linearisation poses, frozen at marginalisation time


@dataclass
class KeyframeWindow:
    max_size: int = 7
    keyframes: list = field(default_factory=list)
    prior: MarginalPrior = None
    # accepted total energies of the last optimisation
    last_energies: list = field(default_factory=list, repr=False)
    last_step: float = float("nan")

    def __len__(self):
        return len(self.keyframes)

    @property
    def ids(self):
        return [kf.id for kf in self.keyframes]

    @property
    def newest(self):
        return self.keyframes[-1]

    def add(self, kf):
        if len(self.keyframes) >= self.max_size:
            raise ValueError("window is full; marginalise first")
        self.keyframes.append(kf)


def _cam_tuple(cam):
    return (cam.fx, cam.fy, cam.cx, cam.cy)


def _photometric(keyframes, poses, rig, cfg, with_system=True):
    """Same-view photometric energy over ordered keyframe pairs."""
    n = len(keyframes)
    H = np.zeros((6 * n, 6 * n)) if with_system else None
    b = np.zeros(6 * n) if with_system else None
    energy, valid = 0.0, 0
    inv = [p.inverse() for p in poses]
    for s, kf_s in enumerate(keyframes):
        host = kf_s.host(0)
        for j in cfg.views:
            sel = host.view == j
            if not sel.any():
                continue
            world_pts = (poses[s] @ rig.body_from_cam(j)).apply(host.cam_pts[sel])
            ref = host.ref[sel]
            cam = _cam_tuple(rig.camera(j))
            for l, kf_l in enumerate(keyframes):
                if l == s:
                    continue
                M = rig.cam_from_body(j) @ inv[l]
                lv = kf_l.frame.level(j, 0)
                e, Hk, bk, nv, _ = kernels.photometric_accumulate(
                    world_pts, ref, M.R, M.t, cam, lv.img, lv.gx, lv.gy, cfg.huber, 0.0)
                energy += e
                valid += nv
                if with_system and nv:
                    # host moves the point, target moves the camera the other way
                    i0, k0 = 6 * s, 6 * l
                    H[i0:i0 + 6, i0:i0 + 6] += Hk
                    H[k0:k0 + 6, k0:k0 + 6] += Hk
                    H[i0:i0 + 6, k0:k0 + 6] -= Hk
                    H[k0:k0 + 6, i0:i0 + 6] -= Hk
                    b[i0:i0 + 6] += bk
                    b[k0:k0 + 6] -= bk
    return energy, H, b, valid


def _prior_terms(window, poses):
    """Prior energy plus its (H, b) expanded over the window's pose blocks."""
    n = len(poses)
    H = np.zeros((6 * n, 6 * n))
    b = np.zeros(6 * n)
    pr = window.prior
    if pr is None:
        return 0.0, H, b
    where = {kid: i for i, kid in enumerate(window.ids)}
    idx = np.concatenate([np.arange(6 * where[k], 6 * where[k] + 6) for k in pr.ids])
    delta = np.concatenate([se3_log(poses[where[k]] @ lin.inverse())
                            for k, lin in zip(pr.ids, pr.lin)])
    energy = float(delta @ pr.H @ delta + 2.0 * pr.b @ delta)
    H[np.ix_(idx, idx)] = pr.H
    b[idx] = pr.H @ delta + pr.b
    return energy, H, b


def ba_energy(window, cfg=None, rig=None):
    """Robust same-view photometric energy of the window (no prior)."""
    cfg = cfg or WindowConfig()
    if len(window) < 2:
        raise WindowTooSmall(f"need at least 2 keyframes, have {len(window)}")
    rig = rig or window.keyframes[0].rig
    poses = [kf.pose for kf in window.keyframes]
    return _photometric(window.keyframes, poses, rig, cfg, with_system=False)[0]


def _system(window, poses, rig, cfg):
    e_ph, H, b, valid = _photometric(window.keyframes, poses, rig, cfg)
    e_pr, Hp, bp = _prior_terms(window, poses)
    return e_ph + e_pr, H + Hp, b + bp, valid


def _total_energy(window, poses, rig, cfg):
    e_ph = _photometric(window.keyframes, poses, rig, cfg, with_system=False)[0]
    return e_ph + _prior_terms(window, poses)[0]


def optimize_window(window, cfg=None, rig=None):
    """Gauss-Newton over all keyframe body poses except the oldest."""
    cfg = cfg or WindowConfig()
    if len(window) < 2:
        raise WindowTooSmall(f"need at least 2 keyframes, have {len(window)}")
    rig = rig or window.keyframes[0].rig
    poses = [kf.pose for kf in window.keyframes]
    energy, H, b, _ = _system(window, poses, rig, cfg)
    e_start = energy
    energies = [energy]
    last_step = 0.0
    for _ in range(cfg.max_iterations):
        dx = solve_step(H[6:, 6:], b[6:])
        lam = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = [poses[0]] + [(se3_exp(lam * dx[6 * i:6 * i + 6]) @ p).normalized()
                                  for i, p in enumerate(poses[1:])]
            e_new = _total_energy(window, trial, rig, cfg)
            if e_new <= energy:
                break
            lam *= 0.5
        else:
            break
        poses = trial
        last_step = lam * float(np.linalg.norm(dx))
        energy, H, b, _ = _system(window, poses, rig, cfg)
        energies.append(energy)
        if last_step < cfg.step_tolerance:
            break
    if energy > DIVERGENCE_FACTOR * e_start and energy > 0:
        raise Diverged(f"window energy {energy:.3g} exceeds {DIVERGENCE_FACTOR}x start {e_start:.3g}")
    window.keyframes = [kf.with_pose(p) for kf, p in zip(window.keyframes, poses)]
    window.last_energies = energies
    window.last_step = last_step
    return window


def schur_marginalize(H, b, marg):
    """Eliminate the variables indexed by ``marg`` from ``(H, b)``.

    Returns ``(H_star, b_star)`` over the remaining variables in their
    original order.
    """
    H = np.asarray(H, dtype=float)
    b = np.asarray(b, dtype=float)
    marg = np.asarray(marg)
    keep = np.setdiff1d(np.arange(len(b)), marg)
    Hmm = H[np.ix_(marg, marg)]
    Hkm = H[np.ix_(keep, marg)]
    try:
        X = np.linalg.solve(Hmm, np.column_stack([Hkm.T, b[marg]]))
    except np.linalg.LinAlgError:
        X = np.linalg.pinv(Hmm) @ np.column_stack([Hkm.T, b[marg]])
    H_star = H[np.ix_(keep, keep)] - Hkm @ X[:, :-1]
    b_star = b[keep] - Hkm @ X[:, -1]
    return H_star, b_star


def marginalize_oldest(window, cfg=None, rig=None):
    """Fold the oldest keyframe into the prior and drop it from the window."""
    cfg = cfg or WindowConfig()
    if len(window) < window.max_size:
        raise WindowNotFull(f"window holds {len(window)} of {window.max_size} keyframes")
    rig = rig or window.keyframes[0].rig
    poses = [kf.pose for kf in window.keyframes]
    _, H, b, _ = _system(window, poses, rig, cfg)
    H_star, b_star = schur_marginalize(H, b, np.arange(6))
    H_star = 0.5 * (H_star + H_star.T)
    w, V = np.linalg.eigh(H_star)
    H_star = (V * np.clip(w, 0.0, None)) @ V.T
    H_star = 0.5 * (H_star + H_star.T)
    window.prior = MarginalPrior(window.ids[1:], H_star, b_star, poses[1:])
    window.keyframes = window.keyframes[1:]
    return window


def keyframe_decision(tr, cfg=None):
    """Promote the frame when it has moved far or lost too many residuals."""
    cfg = cfg or WindowConfig()
    return bool(tr.mean_flow > cfg.flow_threshold or tr.residual_ratio < cfg.min_ratio)
