"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--points N] [--repeat R]
"""

import argparse
import timeit

import numpy as np

from panovo import _kernels_py
from panovo.geometry import central_gradients, se3_exp

try:
    from panovo import _kernels
except ImportError:
    _kernels = None


def make_case(n, seed=0):
    rng = np.random.default_rng(seed)
    h, w = 192, 256
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    img = 128 + 40 * np.sin(0.2 * xx) * np.cos(0.15 * yy) + rng.normal(0, 1, (h, w))
    gx, gy = central_gradients(img)
    cam = (128.0, 128.0, 127.5, 95.5)
    uv = rng.uniform([5, 5], [w - 5, h - 5], (n, 2))
    d = rng.uniform(2, 10, n)
    q = np.stack([(uv[:, 0] - cam[2]) / cam[0] * d, (uv[:, 1] - cam[3]) / cam[1] * d, d], axis=1)
    ref = rng.uniform(0, 255, n)
    T = se3_exp([0.01, -0.02, 0.005, 0.05, 0.01, -0.03])
    photometric = (q, ref, T.R, T.t, cam, img, gx, gy, 9.0, 2.0)

    m = 64
    centres = rng.uniform(-10, 10, (m, 3))
    normals = rng.normal(size=(m, 3))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    axes_u = np.cross(normals, [0.0, 1.0, 0.0])
    axes_u /= np.linalg.norm(axes_u, axis=1, keepdims=True)
    axes_v = np.cross(normals, axes_u)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    ray = (np.zeros(3), dirs, centres, normals, axes_u, axes_v, np.full(m, 1.5), np.full(m, 1.0))
    return photometric, ray


def bench(fn, args, repeat):
    t = timeit.Timer(lambda: fn(*args))
    n, _ = t.autorange()
    return min(t.repeat(repeat, n)) / n


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--points", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=5)
    a = ap.parse_args(argv)
    photometric, ray = make_case(a.points)
    rows = [("photometric_accumulate", "photometric_accumulate", photometric),
            ("photometric_residuals", "photometric_residuals", photometric[:8]),
            ("raycast", "raycast", ray)]
    print(f"{'kernel':<24}{'python [ms]':>14}{'cython [ms]':>14}{'speedup':>10}")
    for label, name, args in rows:
        tp = bench(getattr(_kernels_py, name), args, a.repeat) * 1e3
        if _kernels is None:
            print(f"{label:<24}{tp:>14.3f}{'n/a':>14}{'n/a':>10}")
            continue
        tc = bench(getattr(_kernels, name), args, a.repeat) * 1e3
        print(f"{label:<24}{tp:>14.3f}{tc:>14.3f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
