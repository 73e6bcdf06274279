# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay operation-for-operation identical to _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()


def ar1_filter(double[::1] z, double a, double c, double x_prev, bint stationary_start, double sigma):
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double x = x_prev
    if n == 0:
        return out_arr
    if stationary_start:
        x = sigma * z[0]
    else:
        x = a * x + c * z[0]
    out[0] = x
    for i in range(1, n):
        x = a * x + c * z[i]
        out[i] = x
    return out_arr


def span_linear_means(double[::1] margin_db, Py_ssize_t span_len):
    cdef Py_ssize_t n = margin_db.shape[0]
    cdef Py_ssize_t n_spans = (n + span_len - 1) // span_len
    cdef Py_ssize_t s, i, start, stop
    cdef double acc
    out_arr = np.empty(n_spans, dtype=np.float64)
    cdef double[::1] out = out_arr
    for s in range(n_spans):
        start = s * span_len
        stop = start + span_len
        if stop > n:
            stop = n
        acc = 0.0
        for i in range(start, stop):
            acc = acc + pow(10.0, margin_db[i] / 10.0)
        out[s] = acc / (stop - start)
    return out_arr
