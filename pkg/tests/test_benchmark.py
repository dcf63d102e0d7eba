import importlib.util
import os
import subprocess
import sys
from pathlib import Path

import panovo

BENCH = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"


def test_benchmark_runs(capsys):
    spec = importlib.util.spec_from_file_location("bench_kernels", BENCH)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--points", "200", "--repeat", "1"])
    out = capsys.readouterr().out
    for name in ("photometric_accumulate", "photometric_residuals", "raycast"):
        assert name in out


def test_pure_python_fallback_is_selectable():
    env = dict(os.environ, PANOVO_PURE_PYTHON="1")
    code = "import panovo; print(panovo.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert panovo.BACKEND in ("python", "cython")
