"""Backend selection for the hot kernels.

The compiled extension ``panovo._kernels`` is used when it imports;
otherwise, or when ``PANOVO_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation in ``_kernels_py`` is used.
"""

import os

from . import _kernels_py

_force_py = os.environ.get("PANOVO_PURE_PYTHON", "") not in ("", "0")

_impl = _kernels_py
BACKEND = "python"
if not _force_py:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

photometric_residuals = _impl.photometric_residuals
photometric_accumulate = _impl.photometric_accumulate
raycast = _impl.raycast

__all__ = ["BACKEND", "photometric_residuals", "photometric_accumulate", "raycast"]
