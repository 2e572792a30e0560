# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels for the density hot loop.

Must stay bit-identical with _kernels_py: threshold on the raw float
difference, llrint (round-half-to-even) for the kept residual.
"""

from libc.math cimport llrint

import numpy as np

BACKEND = "cython"


def highpass_image(frame, bg, double tau):
    cdef const unsigned char[:, ::1] f = np.ascontiguousarray(frame, dtype=np.uint8)
    cdef const double[:, ::1] b = np.ascontiguousarray(bg, dtype=np.float64)
    cdef Py_ssize_t h = f.shape[0], w = f.shape[1]
    out_arr = np.zeros((h, w), dtype=np.uint8)
    cdef unsigned char[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double diff
    for i in range(h):
        for j in range(w):
            diff = <double>f[i, j] - b[i, j]
            if diff > tau:
                out[i, j] = <unsigned char>llrint(diff)
    return out_arr


def highpass_sum(frame, bg, double tau):
    cdef const unsigned char[:, ::1] f = np.ascontiguousarray(frame, dtype=np.uint8)
    cdef const double[:, ::1] b = np.ascontiguousarray(bg, dtype=np.float64)
    cdef Py_ssize_t h = f.shape[0], w = f.shape[1]
    cdef Py_ssize_t i, j
    cdef double diff
    cdef long long d = 0
    cdef long long active = 0
    for i in range(h):
        for j in range(w):
            diff = <double>f[i, j] - b[i, j]
            if diff > tau:
                d += llrint(diff)
                active += 1
    return int(d), int(active)
