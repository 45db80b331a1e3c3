"""Pure-Python/numpy versions of the compiled kernels in ``_ckernels.pyx``."""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


def sum_squares(x):
    """Correctly rounded sum of squared samples."""
    x = np.asarray(x, dtype=np.float64)
    return math.fsum(np.square(x))


def frame_mean_squares(x, frame_len, hop):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < frame_len:
        return np.empty(0, dtype=np.float64)
    frames = sliding_window_view(x, frame_len)[::hop]
    return np.einsum("ij,ij->i", frames, frames) / frame_len
