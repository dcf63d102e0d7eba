"""Dataset ingestion, the odometry frame loop and synthetic dataset export.

Dataset layout::

    DIR/calib.txt           rig calibration (see :mod:`panovo.rig`)
    DIR/index               one record per line:
                              frame <timestamp> <name>
                              scan  <timestamp> <file>
    DIR/frames/<name>_c<v>.pgm   one binary PGM per view v = 1..5
    DIR/scans/<file>        ASCII "x y z" per line, LiDAR frame
    DIR/groundtruth.txt     optional, trajectory file format

Every frame is paired with the scan whose timestamp is nearest, within
0.02 s.
"""

from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field

import numpy as np

from .association import DEFAULT_CELL_SIZE, build_sparse_depth, read_scan, write_scan
from .errors import (Diverged, EmptyDataset, InsufficientResiduals, MissingScan, MissingView,
                     NonMonotoneTimestamps, ParseError, TrackingLost)
from .evaluation import Trajectory, write_trajectory
from .frames import Frame
from .geometry import Pose, read_pgm, write_pgm
from .keypoints import KeypointConfig, select_keypoints
from .rig import VIEWS, load_rig, make_panoramic_rig, save_rig
from .simworld import (SimConfig, fit_scene_config, make_scene, make_trajectory, render_frame,
                       simulate_lidar)
from .tracking import TrackingConfig, constant_velocity_guess, track_frame
from .window import (Keyframe, KeyframeWindow, WindowConfig, keyframe_decision,
                     marginalize_oldest, optimize_window)

SCAN_TOLERANCE = 0.02  # seconds
CALIB_FILE = "calib.txt"
INDEX_FILE = "index"
GROUNDTRUTH_FILE = "groundtruth.txt"


@dataclass
class Record:
    timestamp: float
    images: tuple  # five paths, view order
    scan: str
    scan_timestamp: float


@dataclass
class DatasetStream:
    root: str
    rig: object
    records: list
    body_from_lidar: Pose = field(default_factory=Pose.identity)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def load(self, i, levels=4):
        rec = self.records[i]
        frame = Frame([read_pgm(p) for p in rec.images], levels, rec.timestamp, i)
        return frame, read_scan(rec.scan, rec.scan_timestamp)


def _parse_index(path):
    frames, scans = [], []
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in ("frame", "scan"):
                raise ParseError(f"{path}:{ln}: expected 'frame|scan <timestamp> <name>'")
            try:
                ts = float(parts[1])
            except ValueError:
                raise ParseError(f"{path}:{ln}: bad timestamp {parts[1]!r}") from None
            (frames if parts[0] == "frame" else scans).append((ts, parts[2], ln))
    return frames, scans


def ingest_dataset(path):
    """Validate a dataset directory and pair each frame with its scan."""
    if not os.path.isdir(path):
        raise ParseError(f"{path}: not a directory")
    index = os.path.join(path, INDEX_FILE)
    if not os.path.isfile(index):
        raise ParseError(f"{path}: missing {INDEX_FILE}")
    rig = load_rig(os.path.join(path, CALIB_FILE))
    frames, scans = _parse_index(index)
    for kind, rows in (("frame", frames), ("scan", scans)):
        for (t0, _, _), (t1, name, ln) in zip(rows, rows[1:]):
            if t1 <= t0:
                raise NonMonotoneTimestamps(f"{index}:{ln}: {kind} {name} at {t1} after {t0}")
    scan_ts = np.array([s[0] for s in scans])
    records = []
    for ts, name, _ in frames:
        images = tuple(os.path.join(path, "frames", f"{name}_c{v}.pgm") for v in VIEWS)
        for v, p in zip(VIEWS, images):
            if not os.path.isfile(p):
                raise MissingView(f"frame {name} (t={ts}): view {v} image {p} not found")
        if not len(scan_ts):
            raise MissingScan(f"frame {name} (t={ts}): dataset has no scans")
        k = int(np.argmin(np.abs(scan_ts - ts)))
        if abs(scan_ts[k] - ts) > SCAN_TOLERANCE:
            raise MissingScan(f"frame {name} (t={ts}): no scan within {SCAN_TOLERANCE} s")
        scan = os.path.join(path, "scans", scans[k][1])
        if not os.path.isfile(scan):
            raise MissingScan(f"frame {name} (t={ts}): scan file {scan} not found")
        records.append(Record(ts, images, scan, float(scan_ts[k])))
    return DatasetStream(path, rig, records, rig.body_from_lidar)


# ---------------------------------------------------------------------------
# configuration

@dataclass
class PipelineConfig:
    tracking: TrackingConfig = field(default_factory=TrackingConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    keypoints: KeypointConfig = field(default_factory=KeypointConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    views: tuple = VIEWS
    cross_view: bool = True
    cell_size: float = DEFAULT_CELL_SIZE

    def __post_init__(self):
        self.views = tuple(sorted(set(int(v) for v in self.views)))
        if not self.views or not set(self.views) <= set(VIEWS):
            raise ValueError(f"active views must be a non-empty subset of {VIEWS}")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        self.tracking = dataclasses.replace(self.tracking, views=self.views, cross_view=self.cross_view)
        self.window = dataclasses.replace(self.window, views=self.views)


def _coerce(value, default, where):
    try:
        if isinstance(default, bool):
            low = value.strip().lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            return tuple(float(x) if "." in x else int(x) for x in value.replace(",", " ").split())
        return value.strip().strip('"')
    except ValueError:
        raise ParseError(f"{where}: cannot read {value!r}") from None


def load_config(path, views=None, cross_view=None):
    """Read an INI-style config with ``[tracking]``, ``[window]``,
    ``[keypoints]``, ``[sim]`` and ``[pipeline]`` sections."""
    cp = configparser.ConfigParser()
    try:
        if not cp.read(path):
            raise ParseError(f"{path}: cannot read config")
    except configparser.Error as e:
        raise ParseError(f"{path}: {e}") from None
    sections = ("tracking", "window", "keypoints", "sim", "pipeline")
    for name in cp.sections():
        if name not in sections:
            raise ParseError(f"{path}: unknown section [{name}]")
    base = PipelineConfig()
    parts = {}
    for name in ("tracking", "window", "keypoints", "sim"):
        obj = getattr(base, name)
        kw = {}
        if cp.has_section(name):
            fields = {f.name for f in dataclasses.fields(obj)}
            for key, value in cp.items(name):
                if key not in fields:
                    raise ParseError(f"{path}: unknown key {name}.{key}")
                kw[key] = _coerce(value, getattr(obj, key), f"{path} {name}.{key}")
        try:
            parts[name] = dataclasses.replace(obj, **kw)
        except (TypeError, ValueError) as e:
            raise ParseError(f"{path} [{name}]: {e}") from None
    top = {}
    known = {"views", "cross_view", "cell_size"}
    if cp.has_section("pipeline"):
        for key, value in cp.items("pipeline"):
            if key not in known:
                raise ParseError(f"{path}: unknown key pipeline.{key}")
            top[key] = _coerce(value, getattr(base, key), f"{path} pipeline.{key}")
    if views is not None:
        top["views"] = views
    if cross_view is not None:
        top["cross_view"] = cross_view
    try:
        return PipelineConfig(**parts, **top)
    except (TypeError, ValueError) as e:
        raise ParseError(f"{path}: {e}") from None


# ---------------------------------------------------------------------------
# odometry

def transform_integration(T_keyframe_world, T_rel):
    """Current body pose in world from the keyframe pose and ``T_k1_c1``.

    ``T_rel`` maps keyframe-body coordinates to current-body coordinates,
    so the current pose is ``world_from_kf @ kf_from_current``.
    """
    return T_keyframe_world @ T_rel.inverse()


def make_keyframe(kf_id, frame, pose, scan, rig, body_from_lidar, cfg):
    kps = {}
    for v in cfg.views:
        dm = build_sparse_depth(scan, rig, v, body_from_lidar, cfg.cell_size) if len(scan) else None
        img = frame.level(v, 0).img
        kps[v] = select_keypoints(img, dm, cfg.keypoints, view=v) if dm is not None else []
    return Keyframe(kf_id, frame, pose, kps, rig)


@dataclass
class OdometryStats:
    keyframes: int = 0
    residual_views: set = field(default_factory=set)  # target views touched by tracking


def run_odometry(stream, cfg=None, stats=None):
    """Estimate one body pose per frame; the first frame defines the world."""
    cfg = cfg or PipelineConfig()
    if len(stream) == 0:
        raise EmptyDataset(f"{stream.root}: no frames")
    rig = stream.rig
    levels = cfg.tracking.levels
    stats = stats if stats is not None else OdometryStats()
    window = KeyframeWindow(max_size=cfg.window.max_size)
    stamps, poses = [], []

    for i in range(len(stream)):
        frame, scan = stream.load(i, levels)
        if i == 0:
            kf = make_keyframe(0, frame, Pose.identity(), scan, rig, stream.body_from_lidar, cfg)
            window.add(kf)
            stats.keyframes += 1
            stamps.append(frame.timestamp)
            poses.append(kf.pose)
            continue
        kf = window.newest
        prev2 = poses[-2] if len(poses) > 1 else None
        T_init = constant_velocity_guess(prev2, poses[-1], kf.pose)
        try:
            tr = track_frame(kf, frame, T_init, rig, cfg.tracking)
        except (Diverged, InsufficientResiduals) as e:
            raise TrackingLost(f"frame {i} (t={frame.timestamp}): {e}", frame_index=i,
                               trajectory=Trajectory(stamps, poses)) from e
        stats.residual_views.update(v + 1 for v in np.nonzero(tr.pair_counts.sum(axis=0))[0])
        pose = transform_integration(kf.pose, tr.T_k1_c1)
        if keyframe_decision(tr, cfg.window):
            new = make_keyframe(kf.id + 1, frame, pose, scan, rig, stream.body_from_lidar, cfg)
            window.add(new)
            stats.keyframes += 1
            try:
                optimize_window(window, cfg.window, rig)
            except Diverged as e:
                raise TrackingLost(f"frame {i}: window optimisation {e}", frame_index=i,
                                   trajectory=Trajectory(stamps, poses)) from e
            pose = window.newest.pose
            if len(window) == window.max_size:
                marginalize_oldest(window, cfg.window, rig)
        stamps.append(frame.timestamp)
        poses.append(pose)
    return Trajectory(stamps, poses)


# ---------------------------------------------------------------------------
# synthetic datasets

@dataclass
class Corruption:
    """Optional damage applied to rendered images before they are written."""

    blank_view: int = None  # view whose texture is removed
    blank_frames: tuple = ()  # (start, stop) frame range, stop exclusive
    salt_pepper: float = 0.0  # fraction of pixels replaced by 0 or 255

    def apply(self, images, index, rng):
        out = [im.copy() for im in images]
        if self.blank_view is not None and self.blank_frames:
            a, b = self.blank_frames
            if a <= index < b:
                out[self.blank_view - 1][:] = 64.0
        if self.salt_pepper > 0:
            for im in out:
                hit = rng.random(im.shape) < self.salt_pepper
                im[hit] = np.where(rng.random(int(hit.sum())) < 0.5, 0.0, 255.0)
        return out


def simulate_dataset(out, seed, frames, kind, sim=None, rig=None, corruption=None,
                     scan_offset=0.0):
    """Render a synthetic sequence into ``out`` and return the ground truth."""
    sim = sim or SimConfig()
    rig = rig or make_panoramic_rig()
    corruption = corruption or Corruption()
    traj = make_trajectory(kind, frames, sim)
    sim = fit_scene_config(traj, sim)
    scene = make_scene(seed, sim)
    os.makedirs(os.path.join(out, "frames"), exist_ok=True)
    os.makedirs(os.path.join(out, "scans"), exist_ok=True)
    save_rig(os.path.join(out, CALIB_FILE), rig)
    rng = np.random.default_rng([seed, 7])
    lines = ["# frame <timestamp> <name> | scan <timestamp> <file>"]
    stamps = []
    for i, pose in enumerate(traj):
        ts = round(i * sim.frame_dt, 6)
        name = f"{i:06d}"
        images = corruption.apply(render_frame(scene, rig, pose, sim, noise_seed=i), i, rng)
        for v, im in zip(VIEWS, images):
            write_pgm(os.path.join(out, "frames", f"{name}_c{v}.pgm"), im)
        scan = simulate_lidar(scene, pose, sim, rig.body_from_lidar, noise_seed=i, timestamp=ts)
        write_scan(os.path.join(out, "scans", f"{name}.xyz"), scan)
        lines.append(f"frame {ts:.6f} {name}")
        lines.append(f"scan {ts + scan_offset:.6f} {name}.xyz")
        stamps.append(ts)
    with open(os.path.join(out, INDEX_FILE), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    gt = Trajectory(stamps, traj)
    write_trajectory(os.path.join(out, GROUNDTRUTH_FILE), gt)
    return gt
