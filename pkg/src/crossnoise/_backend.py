"""Pick the kernel implementation once, at import time.

The compiled extension is used when it was built. Setting the environment
variable ``CROSSNOISE_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

if os.environ.get("CROSSNOISE_PURE_PYTHON", "") not in ("", "0"):
    from crossnoise import _pykernels as kernels

    BACKEND = "python"
else:
    try:
        from crossnoise import _ckernels as kernels

        BACKEND = "cython"
    except ImportError:  # extension not built
        from crossnoise import _pykernels as kernels

        BACKEND = "python"

sum_squares = kernels.sum_squares
frame_mean_squares = kernels.frame_mean_squares

__all__ = ["BACKEND", "sum_squares", "frame_mean_squares"]
