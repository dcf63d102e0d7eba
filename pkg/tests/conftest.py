import numpy as np
import pytest

from panovo.geometry import CameraModel, Pose, se3_exp
from panovo.rig import make_panoramic_rig


def random_pose(rng, rot_scale=1.0, trans_scale=1.0):
    w = rng.normal(size=3)
    w *= rot_scale * rng.uniform(0, 1) / max(np.linalg.norm(w), 1e-12)
    return se3_exp(np.concatenate([w, trans_scale * rng.normal(size=3)]))


def bilinear_image(rng, h=48, w=64):
    """Globally bilinear image a + b x + c y + d x y.

    Bilinear interpolation and central differences are both exact on it,
    which makes finite-difference Jacobian checks meaningful.
    """
    a, b, c = rng.uniform(60, 120), rng.uniform(-2, 2), rng.uniform(-2, 2)
    d = rng.uniform(-0.03, 0.03)
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    return a + b * xx + c * yy + d * xx * yy


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def rig():
    return make_panoramic_rig()


@pytest.fixture
def cam100():
    return CameraModel(100.0, 100.0, 50.0, 50.0, 101, 101)


@pytest.fixture
def identity():
    return Pose.identity()


class World:
    """A small textured synthetic world with helpers to render frames and keyframes."""

    def __init__(self, rig, seed=3):
        from panovo.simworld import SimConfig, fit_scene_config, make_scene, make_trajectory
        sim = SimConfig()
        self.trajectory = make_trajectory("line-arc", 40, sim)
        self.sim = fit_scene_config(self.trajectory, sim)
        self.scene = make_scene(seed, self.sim)
        self.rig = rig

    def images(self, pose):
        from panovo.simworld import render_frame
        return render_frame(self.scene, self.rig, pose, self.sim)

    def frame(self, pose, index=0, levels=4):
        from panovo.frames import Frame
        return Frame(self.images(pose), levels, timestamp=0.2 * index, index=index)

    def keyframe(self, pose, kf_id=0, frame=None, max_points=400):
        from panovo.keypoints import KeypointConfig
        from panovo.pipeline import PipelineConfig, make_keyframe
        from panovo.simworld import simulate_lidar
        cfg = PipelineConfig(keypoints=KeypointConfig(max_points=max_points))
        frame = frame or self.frame(pose)
        scan = simulate_lidar(self.scene, pose, self.sim)
        return make_keyframe(kf_id, frame, pose, scan, self.rig, Pose.identity(), cfg)


@pytest.fixture(scope="session")
def world(rig):
    return World(rig)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Ten-frame straight-line dataset on disk; treat as read-only."""
    from panovo.pipeline import simulate_dataset
    out = tmp_path_factory.mktemp("ds") / "small"
    simulate_dataset(str(out), seed=1, frames=10, kind="line")
    return out


def copy_dataset(src, dst):
    import shutil
    shutil.copytree(src, dst)
    return dst
