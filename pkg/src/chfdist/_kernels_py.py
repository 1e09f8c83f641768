"""Pure-Python kernel fallbacks, numerically interchangeable with _kernels."""

import math

import numpy as np


def convolve_full(a, b):
    """Full discrete convolution of two float64 vectors."""
    return np.convolve(a, b, mode="full")


def compensated_complex_sum(terms):
    """Exact (fsum) sum of complex terms; order-insensitive by construction."""
    t = np.asarray(terms, dtype=np.complex128)
    return complex(math.fsum(t.real), math.fsum(t.imag))
