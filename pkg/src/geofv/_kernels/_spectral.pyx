# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled spectral-sum kernel.

Evaluates z_i = sum_j [ A_j cos(2 pi f_j . x_i) + B_j sin(2 pi f_j . x_i) ]
for every point x_i.  This is the hot loop of the random field generator;
the point loop is parallelised with OpenMP.
"""

import numpy as np

cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport cos, sin

cnp.import_array()

DEF TWO_PI = 6.283185307179586


def spectral_sum(double[:, ::1] points, double[:, ::1] freqs,
                 double[::1] amp_cos, double[::1] amp_sin):
    cdef Py_ssize_t n = points.shape[0]
    cdef Py_ssize_t m = freqs.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(n)
    cdef double[::1] z = out
    cdef Py_ssize_t i, j
    cdef double acc, theta, x0, x1, x2

    for i in prange(n, nogil=True, schedule="static"):
        acc = 0.0
        x0 = points[i, 0]
        x1 = points[i, 1]
        x2 = points[i, 2]
        for j in range(m):
            theta = TWO_PI * (freqs[j, 0] * x0 + freqs[j, 1] * x1
                              + freqs[j, 2] * x2)
            acc = acc + amp_cos[j] * cos(theta) + amp_sin[j] * sin(theta)
        z[i] = acc
    return out
