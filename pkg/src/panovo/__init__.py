"""Panoramic LiDAR-assisted direct visual odometry."""

from .geometry import CameraModel, Pose, se3_exp, se3_log
from .kernels import BACKEND
from .rig import RigCalibration, load_rig, make_panoramic_rig

__version__ = "0.1.0"

__all__ = ["BACKEND", "CameraModel", "Pose", "RigCalibration", "load_rig", "make_panoramic_rig",
           "se3_exp", "se3_log", "__version__"]
