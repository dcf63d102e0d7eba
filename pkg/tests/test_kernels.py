import numpy as np
import pytest

from conftest import bilinear_image, random_pose
from panovo import _kernels_py, kernels
from panovo.geometry import central_gradients, se3_exp

compiled = pytest.importorskip("panovo._kernels") if kernels.BACKEND == "cython" else None
CAM = (60.0, 58.0, 31.5, 23.5)


def _config(rng, n=60):
    img = bilinear_image(rng)
    gx, gy = central_gradients(img)
    T = random_pose(rng, 0.1, 0.1)
    uv = rng.uniform([4, 4], [59, 43], (n, 2))
    z = rng.uniform(2, 6, n)
    p = np.stack([(uv[:, 0] - CAM[2]) / CAM[0] * z, (uv[:, 1] - CAM[3]) / CAM[1] * z, z], axis=1)
    q = T.inverse().apply(p)  # so that R q + t = p lands inside the image
    ref = rng.uniform(50, 150, n)
    return q, ref, T.R, T.t, img, gx, gy


def test_backend_name():
    assert kernels.BACKEND in ("python", "cython")


@pytest.mark.skipif(compiled is None, reason="compiled extension not built")
def test_backends_agree(rng):
    for _ in range(20):
        q, ref, R, t, img, gx, gy = _config(rng)
        q[:5] += [0, 0, -20]  # push a few behind the camera / out of view
        a = _kernels_py.photometric_residuals(q, ref, R, t, CAM, img, gx, gy)
        b = compiled.photometric_residuals(q, ref, R, t, CAM, img, gx, gy)
        for x, y in zip(a, b):
            np.testing.assert_allclose(np.asarray(x), np.asarray(y), rtol=1e-12, atol=1e-9)
        a = _kernels_py.photometric_accumulate(q, ref, R, t, CAM, img, gx, gy, 9.0, 1.0)
        b = compiled.photometric_accumulate(q, ref, R, t, CAM, img, gx, gy, 9.0, 1.0)
        assert a[0] == pytest.approx(b[0], rel=1e-12)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-8)
        np.testing.assert_allclose(a[2], b[2], rtol=1e-10, atol=1e-8)
        assert a[3:] == b[3:]


@pytest.mark.skipif(compiled is None, reason="compiled extension not built")
def test_raycast_backends_agree(rng):
    k = 6
    centers = rng.uniform(-5, 5, (k, 3)) + [0, 0, 8]
    normals = rng.normal(size=(k, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    au = np.cross(normals, [0, 1, 0])
    au /= np.linalg.norm(au, axis=1, keepdims=True)
    av = np.cross(normals, au)
    hu, hv = rng.uniform(1, 3, k), rng.uniform(1, 3, k)
    dirs = rng.normal(size=(500, 3)) + [0, 0, 2]
    a = _kernels_py.raycast(np.zeros(3), dirs, centers, normals, au, av, hu, hv)
    b = compiled.raycast(np.zeros(3), dirs, centers, normals, au, av, hu, hv)
    for x, y in zip(a, b):
        np.testing.assert_allclose(np.asarray(x), np.asarray(y), rtol=1e-12, atol=1e-12)
    assert (a[1] >= 0).any() and (a[1] < 0).any()


def test_jacobian_matches_central_differences():
    """Analytic twist Jacobian against central differences of the residual."""
    rng = np.random.default_rng(11)
    checked = 0
    worst = 0.0
    for _ in range(100):
        q, ref, R, t, img, gx, gy = _config(rng, 8)
        res, J, valid, _ = kernels.photometric_residuals(q, ref, R, t, CAM, img, gx, gy)
        h = 1e-6
        for k in range(6):
            e = np.zeros(6)
            e[k] = h
            qp = se3_exp(e).apply(q)
            qm = se3_exp(-e).apply(q)
            rp, _, vp, _ = kernels.photometric_residuals(qp, ref, R, t, CAM, img, gx, gy)
            rm, _, vm, _ = kernels.photometric_residuals(qm, ref, R, t, CAM, img, gx, gy)
            ok = valid & vp & vm
            fd = (rp - rm) / (2 * h)
            scale = np.maximum(np.abs(J[ok, k]), 1e-3 * np.abs(J[ok]).max(axis=1))
            rel = np.abs(fd[ok] - J[ok, k]) / scale
            worst = max(worst, float(rel.max(initial=0.0)))
        checked += int(valid.sum())
    assert checked >= 500
    assert worst < 1e-4


def test_residual_definition(cam100):
    img = np.full((48, 64), 100.0)
    gx, gy = central_gradients(img)
    q = np.array([[0.0, 0.0, 2.0]])
    res, J, valid, g = kernels.photometric_residuals(q, [120.0], np.eye(3), np.zeros(3), CAM, img, gx, gy)
    assert valid[0] and res[0] == pytest.approx(20.0) and g[0] == 0.0
    np.testing.assert_allclose(J[0], 0.0)


def test_huber_accumulation_by_hand():
    img = np.full((48, 64), 100.0)
    gx, gy = central_gradients(img)
    q = np.array([[0.0, 0.0, 2.0], [0.1, 0.0, 2.0]])
    e, H, b, nv, ni = kernels.photometric_accumulate(q, [103.0, 120.0], np.eye(3), np.zeros(3), CAM,
                                                     img, gx, gy, 9.0, 0.5)
    assert e == pytest.approx(9.0 + 279.0)
    assert nv == 2 and ni == 0


def test_invalid_points_are_zeroed():
    img = np.full((48, 64), 100.0)
    gx, gy = central_gradients(img)
    q = np.array([[0.0, 0.0, -2.0], [100.0, 0.0, 2.0]])
    res, J, valid, _ = kernels.photometric_residuals(q, [1.0, 1.0], np.eye(3), np.zeros(3), CAM, img, gx, gy)
    assert not valid.any() and not res.any() and not J.any()
