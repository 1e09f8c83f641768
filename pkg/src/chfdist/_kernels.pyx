# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: direct convolution and compensated complex summation.

Semantics must stay interchangeable with _kernels_py; the backend is picked
at import time in _backend.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


def convolve_full(double[::1] a, double[::1] b):
    """Full discrete convolution of two float64 vectors, direct O(la*lb)."""
    cdef Py_ssize_t la = a.shape[0]
    cdef Py_ssize_t lb = b.shape[0]
    cdef Py_ssize_t i, j
    cdef double ai
    out_arr = np.zeros(la + lb - 1, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(la):
        ai = a[i]
        if ai == 0.0:
            continue
        for j in range(lb):
            out[i + j] += ai * b[j]
    return out_arr


def compensated_complex_sum(double complex[::1] terms):
    """Neumaier-compensated sum of complex terms in the order given.

    Unlike plain Kahan, the correction also survives terms larger than the
    running sum, so adversarial cancellation orders stay exact.
    """
    cdef double sr = 0.0, si = 0.0, cr = 0.0, ci = 0.0
    cdef double yr, yi, tr, ti
    cdef Py_ssize_t k
    for k in range(terms.shape[0]):
        yr = terms[k].real
        yi = terms[k].imag
        tr = sr + yr
        ti = si + yi
        if fabs(sr) >= fabs(yr):
            cr += (sr - tr) + yr
        else:
            cr += (yr - tr) + sr
        if fabs(si) >= fabs(yi):
            ci += (si - ti) + yi
        else:
            ci += (yi - ti) + si
        sr = tr
        si = ti
    return complex(sr + cr, si + ci)
