# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Mirrors crossnoise._pykernels."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs
from math import gcd

cnp.import_array()


cdef inline double _neumaier_sq(const double[::1] x, Py_ssize_t start, Py_ssize_t stop) nogil:
    cdef double s = 0.0
    cdef double c = 0.0
    cdef double v, t
    cdef Py_ssize_t i
    for i in range(start, stop):
        v = x[i] * x[i]
        t = s + v
        if fabs(s) >= fabs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


cdef inline double _plain_sq(const double[::1] x, Py_ssize_t start, Py_ssize_t stop) nogil:
    # four independent lanes so the compiler can vectorise; frames are short
    cdef double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0
    cdef Py_ssize_t i = start
    while i + 4 <= stop:
        a0 += x[i] * x[i]
        a1 += x[i + 1] * x[i + 1]
        a2 += x[i + 2] * x[i + 2]
        a3 += x[i + 3] * x[i + 3]
        i += 4
    while i < stop:
        a0 += x[i] * x[i]
        i += 1
    return (a0 + a1) + (a2 + a3)


def sum_squares(const double[::1] x):
    """Compensated sum of squared samples."""
    cdef double out
    with nogil:
        out = _neumaier_sq(x, 0, x.shape[0])
    return out


def frame_mean_squares(const double[::1] x, Py_ssize_t frame_len, Py_ssize_t hop):
    """Mean square of each full frame; partial tail frames are dropped."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_frames = 0
    if n >= frame_len:
        n_frames = (n - frame_len) // hop + 1
    out = np.empty(n_frames, dtype=np.float64)
    if n_frames == 0:
        return out
    # frames and hops are whole multiples of g, so each frame is a run of block sums
    cdef Py_ssize_t g = gcd(frame_len, hop)
    cdef Py_ssize_t per_frame = frame_len // g, per_hop = hop // g
    cdef Py_ssize_t n_blocks = (n_frames - 1) * per_hop + per_frame
    blocks = np.empty(n_blocks, dtype=np.float64)
    cdef double[::1] b = blocks
    cdef double[::1] o = out
    cdef Py_ssize_t i, j, first
    cdef double acc, inv = 1.0 / frame_len
    with nogil:
        for i in range(n_blocks):
            b[i] = _plain_sq(x, i * g, (i + 1) * g)
        for i in range(n_frames):
            first = i * per_hop
            acc = 0.0
            for j in range(per_frame):
                acc += b[first + j]
            o[i] = acc * inv
    return out
