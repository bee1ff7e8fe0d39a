# cython: boundscheck=False, wraparound=False, nonecheck=False, cdivision=True
"""Compiled per-pixel kernels.

Mirrors the primitives in ``_kernels_np`` one for one; selected at import
time by ``floodstream.backends`` when present.
"""

import numpy as np

NAME = "cython"


def accumulate_into(counts, cells):
    _accumulate_into(counts.ravel(), cells.ravel())


cdef void _accumulate_into(unsigned int[::1] counts, const unsigned char[::1] cells):
    cdef Py_ssize_t i, n = cells.shape[0]
    for i in range(n):
        if cells[i] > 0:
            counts[i] += 1


def overlap_counts(counts, int n_inputs):
    bins = np.zeros(n_inputs + 1, dtype=np.int64)
    _overlap_counts(counts.ravel(), bins)
    return bins


cdef void _overlap_counts(const unsigned int[::1] counts, long long[::1] bins):
    cdef Py_ssize_t i, n = counts.shape[0]
    for i in range(n):
        bins[counts[i]] += 1


def pair_counts(a, b):
    return _pair_counts(a.ravel(), b.ravel())


cdef tuple _pair_counts(const unsigned char[::1] a, const unsigned char[::1] b):
    cdef Py_ssize_t i, n = a.shape[0]
    cdef long long inter = 0, union_ = 0
    cdef bint wa, wb
    for i in range(n):
        wa = a[i] > 0
        wb = b[i] > 0
        if wa and wb:
            inter += 1
        if wa or wb:
            union_ += 1
    return inter, union_


def composite_fill(counts, int n_inputs, out):
    _composite_fill(counts.ravel(), n_inputs, out)


cdef void _composite_fill(
    const unsigned int[::1] counts, int n_inputs, unsigned char[:, ::1] out
):
    cdef Py_ssize_t i, n = counts.shape[0]
    cdef double sat, denom = n_inputs if n_inputs > 0 else 1
    cdef unsigned char grey
    for i in range(n):
        if counts[i] == 0:
            out[i, 0] = out[i, 1] = out[i, 2] = out[i, 3] = 0
        else:
            sat = counts[i] / denom
            grey = <unsigned char> (255.0 * (1.0 - sat) + 0.5)
            out[i, 0] = grey
            out[i, 1] = grey
            out[i, 2] = 255
            out[i, 3] = 255
