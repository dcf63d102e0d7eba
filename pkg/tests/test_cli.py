import re
import subprocess
import sys

import numpy as np
import pytest

from conftest import copy_dataset
from panovo.cli import main
from panovo.geometry import write_pgm


def test_simulate_run_evaluate(tmp_path, capsys):
    ds = tmp_path / "ds"
    assert main(["simulate", "--seed", "4", "--frames", "20", "--trajectory", "arc", "--out", str(ds)]) == 0
    assert (ds / "groundtruth.txt").exists() and (ds / "calib.txt").exists()
    est = tmp_path / "est.txt"
    assert main(["run", "--dataset", str(ds), "--out", str(est)]) == 0
    capsys.readouterr()
    svg = tmp_path / "p.svg"
    assert main(["evaluate", "--est", str(est), "--gt", str(ds / "groundtruth.txt"),
                 "--plot", str(svg)]) == 0
    out = capsys.readouterr().out.strip()
    assert re.fullmatch(r"\d+\.\d{6}", out)
    assert float(out) < 0.01
    assert svg.read_text().startswith("<svg")


def test_evaluate_identical_prints_zero(tmp_path, capsys, small_dataset):
    gt = str(small_dataset / "groundtruth.txt")
    # a straight line is collinear, so use an arc for a well-posed alignment
    ds = tmp_path / "arc"
    main(["simulate", "--seed", "1", "--frames", "4", "--trajectory", "arc", "--out", str(ds)])
    capsys.readouterr()
    gt = str(ds / "groundtruth.txt")
    assert main(["evaluate", "--est", gt, "--gt", gt]) == 0
    assert capsys.readouterr().out.strip() == "0.000000"


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["simulate", "--seed", "1", "--frames", "5", "--trajectory", "zigzag", "--out", "x"],
    ["simulate", "--seed", "1", "--frames", "1", "--trajectory", "line", "--out", "x"],
    ["simulate", "--seed", "one", "--frames", "5", "--trajectory", "line", "--out", "x"],
    ["run", "--dataset", "x"],
    ["run", "--dataset", "x", "--out", "y", "--views", "0,6"],
    ["evaluate", "--est", "a"],
])
def test_usage_errors(argv, capsys):
    assert main(argv) == 1
    assert capsys.readouterr().err


def test_data_errors(tmp_path, small_dataset):
    assert main(["run", "--dataset", str(tmp_path / "missing"), "--out", str(tmp_path / "o.txt")]) == 2
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1 2\n")
    gt = str(small_dataset / "groundtruth.txt")
    assert main(["evaluate", "--est", str(bad), "--gt", gt]) == 2
    assert main(["evaluate", "--est", str(tmp_path / "nofile"), "--gt", gt]) == 2
    cfg = tmp_path / "c.ini"
    cfg.write_text("[tracking]\nnope = 1\n")
    assert main(["run", "--dataset", str(small_dataset), "--out", str(tmp_path / "o.txt"),
                 "--config", str(cfg)]) == 2


def test_degenerate_alignment_is_a_data_error(small_dataset):
    gt = str(small_dataset / "groundtruth.txt")  # straight line: collinear
    assert main(["evaluate", "--est", gt, "--gt", gt]) == 2


def test_tracking_lost_exit_code(tmp_path, small_dataset):
    ds = copy_dataset(small_dataset, tmp_path / "ds")
    for v in range(1, 6):
        write_pgm(ds / "frames" / f"000003_c{v}.pgm", np.full((192, 256), 64.0))
    out = tmp_path / "partial.txt"
    assert main(["run", "--dataset", str(ds), "--out", str(out)]) == 3
    rows = [ln for ln in out.read_text().splitlines() if not ln.startswith("#")]
    assert len(rows) == 3


def test_run_options(tmp_path, small_dataset):
    out = tmp_path / "mono.txt"
    assert main(["run", "--dataset", str(small_dataset), "--out", str(out),
                 "--views", "1", "--no-cross-view"]) == 0
    assert len(out.read_text().splitlines()) == 11


def test_simulate_corruption_options(tmp_path):
    ds = tmp_path / "ds"
    assert main(["simulate", "--seed", "1", "--frames", "3", "--trajectory", "line", "--out", str(ds),
                 "--blank", "1:1:2", "--salt-pepper", "0.1", "--image-noise", "1",
                 "--range-noise", "0.01"]) == 0
    from panovo.geometry import read_pgm
    img = read_pgm(ds / "frames" / "000001_c1.pgm")
    values = set(np.unique(img))
    assert values <= {0.0, 64.0, 255.0} and len(values) == 3  # salt and pepper on top of the blank
    assert main(["simulate", "--seed", "1", "--frames", "3", "--trajectory", "line", "--out", str(ds),
                 "--blank", "1:3:2"]) == 1


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "panovo", "evaluate"], capture_output=True, text=True)
    assert proc.returncode == 1
    assert "usage" in proc.stderr.lower() or "error" in proc.stderr.lower()
