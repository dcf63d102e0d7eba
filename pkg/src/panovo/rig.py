"""Five-camera panoramic rig and the extrinsic chaining identities.

The body frame coincides with camera 1, so ``cam_from_body(1)`` is the
identity.  View indices are 1-based throughout.

Calibration file grammar (INI-style, parsed with :mod:`configparser`)::

    # optional; identity when absent
    [lidar]
    body_from_lidar = <16 numbers, row-major 4x4>

    [camera1]
    fx = 128.0
    fy = 128.0
    cx = 127.5
    cy = 95.5
    width = 256
    height = 192
    cam_from_body = <16 numbers, row-major 4x4>

    [camera2]
    ...

Exactly five ``[cameraN]`` sections (N = 1..5) are required.  Numbers may
be separated by whitespace and/or commas; ``#`` and ``;`` start comments.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import IndexOutOfRange, NonIdentityBodyFrame, ParseError, WrongCameraCount
from .geometry import CameraModel, Pose

NUM_VIEWS = 5
VIEWS = (1, 2, 3, 4, 5)
BODY_FRAME_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class RigCalibration:
    cameras: tuple  # ((CameraModel, Pose cam_from_body), ...) in view order
    body_from_lidar: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        cams = tuple(self.cameras)
        if len(cams) != NUM_VIEWS:
            raise WrongCameraCount(f"rig needs {NUM_VIEWS} cameras, got {len(cams)}")
        if not cams[0][1].allclose(Pose.identity(), atol=BODY_FRAME_TOL):
            raise NonIdentityBodyFrame("camera 1 extrinsic must be the identity (body = camera 1)")
        object.__setattr__(self, "cameras", cams)
        object.__setattr__(self, "_body_from_cam",
                           tuple(T.inverse() for _, T in cams))

    def _check(self, view):
        if not (isinstance(view, (int, np.integer)) and 1 <= view <= NUM_VIEWS):
            raise IndexOutOfRange(f"view index {view!r} not in 1..{NUM_VIEWS}")

    def camera(self, view):
        self._check(view)
        return self.cameras[view - 1][0]

    def cam_from_body(self, view):
        self._check(view)
        return self.cameras[view - 1][1]

    def body_from_cam(self, view):
        self._check(view)
        return self._body_from_cam[view - 1]


def chain_tracking(rig, T_k1_c1, j, l):
    """Pose taking keyframe view ``j`` coordinates to current view ``l``.

    ``T_k1_c1`` maps the keyframe body frame into the current body frame;
    the two outer factors are static extrinsics.
    """
    return rig.cam_from_body(l) @ T_k1_c1 @ rig.body_from_cam(j)


def chain_world(rig, world_from_body, l):
    """World pose of view ``l`` given the body pose in the world."""
    return world_from_body @ rig.body_from_cam(l)


# ---------------------------------------------------------------------------
# file io

_NUM_SPLIT = re.compile(r"[\s,]+")


def _floats(text, n, where):
    parts = [p for p in _NUM_SPLIT.split(text.strip()) if p]
    if len(parts) != n:
        raise ParseError(f"{where}: expected {n} numbers, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from exc


def _matrix_pose(text, where):
    T = _floats(text, 16, where).reshape(4, 4)
    if not np.allclose(T[3], [0, 0, 0, 1], atol=1e-12):
        raise ParseError(f"{where}: bottom row must be 0 0 0 1")
    pose = Pose.from_matrix(T)
    if not pose.is_valid(tol=1e-6):
        raise ParseError(f"{where}: rotation block is not orthonormal")
    return pose


def load_rig(path):
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path) as f:
            parser.read_file(f)
    except (OSError, configparser.Error) as exc:
        raise ParseError(f"{path}: {exc}") from exc

    cams = {}
    for name in parser.sections():
        m = re.fullmatch(r"camera\s*(\d+)", name.strip(), flags=re.IGNORECASE)
        if m:
            cams[int(m.group(1))] = parser[name]
        elif name.strip().lower() != "lidar":
            raise ParseError(f"{path}: unknown section [{name}]")
    if len(cams) != NUM_VIEWS:
        raise WrongCameraCount(f"{path}: expected {NUM_VIEWS} cameras, found {len(cams)}")
    if sorted(cams) != list(VIEWS):
        raise ParseError(f"{path}: cameras must be numbered 1..{NUM_VIEWS}, got {sorted(cams)}")

    cameras = []
    for i in VIEWS:
        sec = cams[i]
        where = f"{path} [camera{i}]"
        try:
            cam = CameraModel(float(sec["fx"]), float(sec["fy"]),
                              float(sec["cx"]), float(sec["cy"]),
                              int(sec["width"]), int(sec["height"]))
            T = _matrix_pose(sec["cam_from_body"], where)
        except KeyError as exc:
            raise ParseError(f"{where}: missing key {exc}") from exc
        except ValueError as exc:
            raise ParseError(f"{where}: {exc}") from exc
        cameras.append((cam, T))

    if not cameras[0][1].allclose(Pose.identity(), atol=BODY_FRAME_TOL):
        raise NonIdentityBodyFrame(f"{path}: camera 1 extrinsic deviates from identity")

    body_from_lidar = Pose.identity()
    if parser.has_section("lidar") and parser.has_option("lidar", "body_from_lidar"):
        body_from_lidar = _matrix_pose(parser["lidar"]["body_from_lidar"], f"{path} [lidar]")
    return RigCalibration(tuple(cameras), body_from_lidar)


def _fmt_matrix(T):
    return " ".join(repr(float(x)) for x in T.reshape(-1))


def save_rig(path, rig):
    lines = ["[lidar]", f"body_from_lidar = {_fmt_matrix(rig.body_from_lidar.matrix())}", ""]
    for i in VIEWS:
        cam, T = rig.cameras[i - 1]
        lines += [
            f"[camera{i}]",
            f"fx = {float(cam.fx)!r}",
            f"fy = {float(cam.fy)!r}",
            f"cx = {float(cam.cx)!r}",
            f"cy = {float(cam.cy)!r}",
            f"width = {cam.width}",
            f"height = {cam.height}",
            f"cam_from_body = {_fmt_matrix(T.matrix())}",
            "",
        ]
    with open(path, "w") as f:
        f.write("\n".join(lines))


def yaw_rotation(angle):
    """Rotation about the camera y axis (image-down); positive turns right."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def make_panoramic_rig(width=256, height=192, hfov_deg=90.0, ring_radius=0.05,
                       body_from_lidar=None):
    """Five identical cameras yawed 72 degrees apart on a small ring.

    Camera 1 sits at the body origin looking along +z; the others are
    placed on a circle of ``ring_radius`` through camera 1.
    """
    f = float(0.5 * width / np.tan(np.radians(hfov_deg) / 2))
    cam = CameraModel(f, f, (width - 1) / 2, (height - 1) / 2, width, height)
    centre = np.array([0.0, 0.0, -ring_radius])
    cameras = []
    for i in VIEWS:
        R_bc = yaw_rotation(np.radians(72.0 * (i - 1)))
        pos = centre + R_bc @ np.array([0.0, 0.0, ring_radius])
        body_from_cam = Pose(R_bc, pos)
        cam_from_body = Pose.identity() if i == 1 else body_from_cam.inverse()
        cameras.append((cam, cam_from_body))
    return RigCalibration(tuple(cameras), body_from_lidar or Pose.identity())
