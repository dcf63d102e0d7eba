import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import bilinear_image, random_pose
from panovo.errors import BehindCamera, NearSingularRotation, NonPositiveDepth, OutOfBounds, ParseError
from panovo.geometry import (
    CameraModel,
    ImageLevel,
    Pose,
    build_pyramid,
    central_gradients,
    downsample,
    project,
    read_pgm,
    sample_bilinear,
    sample_many,
    se3_exp,
    se3_log,
    so3_exp,
    so3_log,
    unproject,
    warp_pixel,
    write_pgm,
)

finite = st.floats(-5, 5, allow_nan=False)


# --- SE(3) ---------------------------------------------------------------

def test_zero_twist_is_identity():
    p = se3_exp(np.zeros(6))
    assert np.array_equal(p.R, np.eye(3)) and np.array_equal(p.t, np.zeros(3))


def test_pure_translation_twist():
    p = se3_exp([0, 0, 0, 1, 2, 3])
    np.testing.assert_allclose(p.R, np.eye(3), atol=1e-15)
    np.testing.assert_allclose(p.t, [1, 2, 3], atol=1e-15)


def test_quarter_turn_about_z():
    p = se3_exp([0, 0, np.pi / 2, 0, 0, 0])
    np.testing.assert_allclose(p.apply(np.array([1.0, 0, 0])), [0, 1, 0], atol=1e-12)


def test_log_at_pi_raises():
    with pytest.raises(NearSingularRotation):
        se3_log(se3_exp([np.pi, 0, 0, 0, 0, 0]))
    with pytest.raises(NearSingularRotation):
        so3_log(np.diag([1.0, -1.0, -1.0]))


def test_rotation_matches_scipy_oracle():
    from scipy.spatial.transform import Rotation
    rng = np.random.default_rng(3)
    for _ in range(200):
        w = rng.normal(size=3) * rng.uniform(0, 3)
        np.testing.assert_allclose(so3_exp(w), Rotation.from_rotvec(w).as_matrix(), atol=1e-13)


@settings(max_examples=300, deadline=None)
@given(st.lists(finite, min_size=6, max_size=6), st.floats(0, np.pi - 1e-3))
def test_exp_log_roundtrip(v, angle):
    xi = np.array(v)
    n = np.linalg.norm(xi[:3])
    xi[:3] = xi[:3] / n * angle if n > 1e-9 else 0.0
    np.testing.assert_allclose(se3_log(se3_exp(xi)), xi, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_log_exp_roundtrip_pose(seed):
    p = random_pose(np.random.default_rng(seed), rot_scale=np.pi - 1e-3, trans_scale=3.0)
    q = se3_exp(se3_log(p))
    np.testing.assert_allclose(q.matrix(), p.matrix(), atol=1e-10)


def test_small_angle_branch_is_continuous():
    for theta in (1e-12, 1e-6, 9.99e-4, 1.001e-3):
        xi = np.array([theta, 0, 0, 0.3, -0.2, 0.1])
        np.testing.assert_allclose(se3_log(se3_exp(xi)), xi, atol=1e-14)


def test_pose_group_laws(rng):
    a, b, c = (random_pose(rng, 2.0, 2.0) for _ in range(3))
    np.testing.assert_allclose(((a @ b) @ c).matrix(), (a @ (b @ c)).matrix(), atol=1e-12)
    assert (a.inverse() @ a).allclose(Pose.identity(), atol=1e-12)
    np.testing.assert_allclose((a @ b).matrix(), a.matrix() @ b.matrix(), atol=1e-12)
    assert a.is_valid()


def test_reflection_is_not_a_valid_pose():
    assert not Pose(np.diag([1.0, 1.0, -1.0]), np.zeros(3)).is_valid()


def test_pose_is_immutable(rng):
    p = random_pose(rng)
    with pytest.raises(ValueError):
        p.t[0] = 1.0


def test_normalized_restores_orthonormality(rng):
    p = random_pose(rng)
    noisy = Pose(p.R + 1e-7, p.t)
    assert not noisy.is_valid(1e-9)
    assert noisy.normalized().is_valid(1e-12)


# --- camera --------------------------------------------------------------

def test_project_examples(cam100):
    np.testing.assert_allclose(project(cam100, [0, 0, 2]), [50, 50])
    np.testing.assert_allclose(project(cam100, [1, 0, 2]), [100, 50])
    with pytest.raises(NonPositiveDepth):
        project(cam100, [0, 0, 0])


def test_unproject_examples(cam100):
    np.testing.assert_allclose(unproject(cam100, [50, 50], 2.0), [0, 0, 2])
    with pytest.raises(NonPositiveDepth):
        unproject(cam100, [50, 50], 0.0)


def test_camera_validation():
    with pytest.raises(ValueError):
        CameraModel(0, 1, 1, 1, 4, 4)
    with pytest.raises(ValueError):
        CameraModel(1, 1, 4, 1, 4, 4)


@settings(max_examples=300, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.05, 50))
def test_unproject_project_roundtrip(x, y, z):
    cam = CameraModel(320.0, 310.0, 160.0, 120.0, 320, 240)
    p = np.array([x, y, z])
    np.testing.assert_allclose(unproject(cam, project(cam, p), z), p, atol=1e-9 * max(1, z))
    u = np.array([x * 50 + 160, y * 40 + 120])
    np.testing.assert_allclose(project(cam, unproject(cam, u, z)), u, atol=1e-9)


def test_scaled_intrinsics_follow_pixel_centres():
    cam = CameraModel(200.0, 200.0, 127.5, 95.5, 256, 192)
    s = cam.scaled(1)
    assert (s.width, s.height) == (128, 96)
    assert s.cx == pytest.approx(63.5) and s.fx == pytest.approx(100.0)


# --- warp ----------------------------------------------------------------

def test_warp_examples(cam100):
    np.testing.assert_allclose(warp_pixel(cam100, cam100, Pose.identity(), [50, 50], 2.0), [50, 50])
    shift = Pose(np.eye(3), [1.0, 0, 0])
    np.testing.assert_allclose(warp_pixel(cam100, cam100, shift, [50, 50], 2.0), [100, 50])
    behind = se3_exp([0, np.pi * 0.9, 0, 0, 0, 0])
    with pytest.raises(BehindCamera):
        warp_pixel(cam100, cam100, behind, [50, 50], 2.0)


def test_warp_composition(rng):
    cam = CameraModel(300.0, 300.0, 160.0, 120.0, 320, 240)
    for _ in range(200):
        T1 = random_pose(rng, 0.1, 0.2)
        T2 = random_pose(rng, 0.1, 0.2)
        u = rng.uniform([20, 20], [300, 220])
        d = rng.uniform(2, 10)
        direct = warp_pixel(cam, cam, T2 @ T1, u, d)
        mid_depth = T1.apply(unproject(cam, u, d))[2]
        two_step = warp_pixel(cam, cam, T2, warp_pixel(cam, cam, T1, u, d), mid_depth)
        np.testing.assert_allclose(direct, two_step, atol=1e-7)


# --- sampling ------------------------------------------------------------

def test_sample_constant_and_ramp():
    v, g = sample_bilinear(np.full((10, 10), 7.0), [4.3, 5.6])
    assert v == pytest.approx(7.0) and np.allclose(g, 0)
    ramp = np.tile(np.arange(10.0), (10, 1))
    v, g = sample_bilinear(ramp, [2.5, 3.0])
    assert v == pytest.approx(2.5)
    np.testing.assert_allclose(g, [1.0, 0.0])
    with pytest.raises(OutOfBounds):
        sample_bilinear(ramp, [-1.0, 0.0])
    with pytest.raises(OutOfBounds):
        sample_bilinear(ramp, [0.5, 4.0])  # inside the image, outside the gradient margin


def test_sample_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    yy, xx = np.mgrid[0:40, 0:50].astype(float)
    img = 100 + 20 * np.sin(0.21 * xx + 0.13 * yy) + 15 * np.cos(0.17 * yy)
    for _ in range(50):
        u = rng.uniform([3, 3], [46, 36])
        _, g = sample_bilinear(img, u)
        lvl = ImageLevel(img)
        # central differences of the interpolated surface, step 1 px
        fd = [0.5 * (sample_bilinear(img, u + e)[0] - sample_bilinear(img, u - e)[0])
              for e in (np.array([1.0, 0]), np.array([0, 1.0]))]
        np.testing.assert_allclose(g, fd, atol=1e-6)
        v2, g2, ok = lvl.sample(u)
        assert ok[0]
        np.testing.assert_allclose(g2[0], g, atol=1e-9)


def test_sample_bilinear_image_gradient_is_exact():
    img = bilinear_image(np.random.default_rng(2))
    u = np.array([17.3, 21.8])
    _, g = sample_bilinear(img, u)
    h = 1e-5
    fd = [(sample_bilinear(img, u + e)[0] - sample_bilinear(img, u - e)[0]) / (2 * h)
          for e in (np.array([h, 0]), np.array([0, h]))]
    np.testing.assert_allclose(g, fd, rtol=1e-6)


def test_sample_many_matches_scalar(rng):
    img = rng.uniform(0, 255, (30, 40))
    gx, gy = central_gradients(img)
    uv = np.vstack([rng.uniform([1, 1], [38, 28], (100, 2)), [[0.5, 4], [38.5, 4], [10, 28.5]]])
    vals, grads, valid = sample_many(img, gx, gy, uv)
    assert valid[:100].all() and not valid[100:].any()
    for k in range(100):
        v, g = sample_bilinear(img, uv[k])
        assert vals[k] == pytest.approx(v, abs=1e-9)
        np.testing.assert_allclose(grads[k], g, atol=1e-9)


def test_sampling_at_far_border():
    img = np.tile(np.arange(12.0), (9, 1))
    v, g = sample_bilinear(img, [10.0, 7.0])
    assert v == pytest.approx(10.0) and g[0] == pytest.approx(1.0)


def test_pyramid_levels():
    img = np.arange(64.0 * 48).reshape(48, 64)
    pyr = build_pyramid(img, 3)
    assert [lv.img.shape for lv in pyr] == [(48, 64), (24, 32), (12, 16)]
    np.testing.assert_allclose(downsample(img)[0, 0], img[:2, :2].mean())


# --- PGM -----------------------------------------------------------------

def test_pgm_roundtrip(tmp_path, rng):
    img = rng.integers(0, 256, (12, 17)).astype(float)
    write_pgm(tmp_path / "a.pgm", img)
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), img)


def test_pgm_with_comment(tmp_path):
    (tmp_path / "c.pgm").write_bytes(b"P5\n# made by hand\n2 2\n255\n\x01\x02\x03\x04")
    np.testing.assert_array_equal(read_pgm(tmp_path / "c.pgm"), [[1, 2], [3, 4]])


def test_pgm_rejects_other_magic(tmp_path):
    (tmp_path / "b.pgm").write_bytes(b"P2\n2 2\n255\n1 2 3 4\n")
    with pytest.raises(ParseError):
        read_pgm(tmp_path / "b.pgm")
    (tmp_path / "t.pgm").write_bytes(b"P5\n4 4\n255\n\x00")
    with pytest.raises(ParseError):
        read_pgm(tmp_path / "t.pgm")


@pytest.mark.parametrize("theta", [1.5e-3, 2.2e-3, 1e-2, 0.05, 0.0999, 0.1001, 0.5])
def test_log_is_accurate_just_above_the_series_cutoff(theta):
    xi = np.array([theta * 0.6, -theta * 0.8, 0.0, 7.0, -9.0, 5.0])
    np.testing.assert_allclose(se3_log(se3_exp(xi)), xi, atol=1e-12)
