"""Command line entry point: ``simulate``, ``run`` and ``evaluate``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 tracking lost.
"""

from __future__ import annotations

import argparse
import sys

from .errors import DataError, PanoVOError, TrackingLost
from .evaluation import ate_rmse, plot_svg, read_trajectory, write_trajectory

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_LOST = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _views(text):
    try:
        views = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad view list {text!r}") from None
    if not views or any(v < 1 or v > 5 for v in views):
        raise argparse.ArgumentTypeError("views must be a comma separated subset of 1..5")
    return views


def _blank(text):
    try:
        view, start, stop = (int(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected VIEW:START:STOP") from None
    if not 1 <= view <= 5 or stop < start:
        raise argparse.ArgumentTypeError("expected VIEW in 1..5 and START <= STOP")
    return view, start, stop


def build_parser():
    p = _Parser(prog="panovo", description="Panoramic LiDAR-assisted direct visual odometry.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="render a synthetic dataset with ground truth")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--trajectory", required=True,
                   choices=["line", "arc", "indoor-loop", "line-arc", "fast-yaw"])
    s.add_argument("--out", required=True)
    s.add_argument("--range-noise", type=float, default=0.0, help="LiDAR range sigma, metres")
    s.add_argument("--image-noise", type=float, default=0.0, help="pixel noise sigma")
    s.add_argument("--salt-pepper", type=float, default=0.0, help="fraction of outlier pixels")
    s.add_argument("--blank", type=_blank, default=None, metavar="VIEW:START:STOP",
                   help="remove a view's texture for frames START..STOP-1")

    r = sub.add_parser("run", help="run odometry on a dataset directory")
    r.add_argument("--dataset", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--views", type=_views, default=None)
    r.add_argument("--no-cross-view", action="store_true")
    r.add_argument("--config", default=None)

    e = sub.add_parser("evaluate", help="ATE RMSE of an estimate against ground truth")
    e.add_argument("--est", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--plot", default=None)
    return p


def _simulate(a):
    from .pipeline import Corruption, simulate_dataset
    from .simworld import SimConfig

    if a.frames < 2:
        raise UsageError("--frames must be at least 2")
    try:
        sim = SimConfig(range_noise=a.range_noise, image_noise=a.image_noise)
    except ValueError as e:
        raise UsageError(str(e)) from None
    if not 0.0 <= a.salt_pepper <= 1.0:
        raise UsageError("--salt-pepper must lie in [0, 1]")
    corr = Corruption(salt_pepper=a.salt_pepper)
    if a.blank:
        corr.blank_view, corr.blank_frames = a.blank[0], a.blank[1:]
    simulate_dataset(a.out, a.seed, a.frames, a.trajectory, sim, corruption=corr)
    print(f"wrote {a.frames} frames to {a.out}")
    return EXIT_OK


def _run(a):
    from .pipeline import PipelineConfig, ingest_dataset, load_config, run_odometry

    cross = False if a.no_cross_view else None
    if a.config:
        cfg = load_config(a.config, views=a.views, cross_view=cross)
    else:
        kw = {}
        if a.views is not None:
            kw["views"] = a.views
        if cross is not None:
            kw["cross_view"] = cross
        cfg = PipelineConfig(**kw)
    stream = ingest_dataset(a.dataset)
    try:
        traj = run_odometry(stream, cfg)
    except TrackingLost as e:
        if e.trajectory is not None:
            write_trajectory(a.out, e.trajectory)
        print(f"tracking lost: {e}", file=sys.stderr)
        return EXIT_LOST
    write_trajectory(a.out, traj)
    print(f"wrote {len(traj)} poses to {a.out}")
    return EXIT_OK


def _evaluate(a):
    est = read_trajectory(a.est)
    gt = read_trajectory(a.gt)
    print(f"{ate_rmse(est, gt):.6f}")
    if a.plot:
        plot_svg(a.plot, est, gt)
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
        if a.command is None:
            raise UsageError(parser.format_usage().strip())
        return {"simulate": _simulate, "run": _run, "evaluate": _evaluate}[a.command](a)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except TrackingLost as e:
        print(f"tracking lost: {e}", file=sys.stderr)
        return EXIT_LOST
    except (DataError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except PanoVOError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
