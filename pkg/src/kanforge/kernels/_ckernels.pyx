# cython: language_level=3
"""Compiled versions of the univariate basis kernels.

Mirrors kanforge.kernels.numpy_backend operation-for-operation so that the
two backends agree to the last bit for the pure +-*/ kernels (B-spline) and
to rounding of the libm transcendentals for the rest.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, exp, sin

cnp.import_array()


cdef inline double[::1] _flat64(object x):
    return np.ascontiguousarray(np.asarray(x, dtype=np.float64).reshape(-1))


def bspline_features(object x, double lo, double hi, int G, int k):
    """All G+k degree-k B-spline basis values at each entry of x."""
    if not lo < hi:
        raise ValueError(f"grid range [{lo}, {hi}] is empty")
    if G < 1 or k < 0:
        raise ValueError(f"need G >= 1 and k >= 0, got G={G}, k={k}")
    cdef double[::1] xf = _flat64(x)
    cdef Py_ssize_t n = xf.shape[0]
    cdef int m = G + 2 * k + 1
    cdef int nb = G + k
    cdef double h = (hi - lo) / G
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, nb), dtype=np.float64)
    cdef double[::1] t = np.empty(m, dtype=np.float64)
    cdef double[::1] work = np.empty(m - 1, dtype=np.float64)
    cdef Py_ssize_t j
    cdef int i, d, cols
    cdef double xv, left, right

    for i in range(m):
        t[i] = lo + (i - k) * h
    for j in range(n):
        xv = xf[j]
        for i in range(m - 1):
            work[i] = 1.0 if (t[i] <= xv < t[i + 1]) else 0.0
        for d in range(1, k + 1):
            cols = m - 1 - d
            for i in range(cols):
                left = (xv - t[i]) / (t[d + i] - t[i]) * work[i]
                right = (t[d + 1 + i] - xv) / (t[d + 1 + i] - t[1 + i]) * work[i + 1]
                work[i] = left + right
        for i in range(nb):
            out[j, i] = work[i]
    return out


def bspline_features_grad(object x, double lo, double hi, int G, int k):
    """d/dx of every degree-k basis value; zero everywhere for k=0."""
    if not lo < hi:
        raise ValueError(f"grid range [{lo}, {hi}] is empty")
    if G < 1 or k < 0:
        raise ValueError(f"need G >= 1 and k >= 0, got G={G}, k={k}")
    cdef double[::1] xf = _flat64(x)
    cdef Py_ssize_t n = xf.shape[0]
    cdef int m = G + 2 * k + 1
    cdef int nb = G + k
    cdef double h = (hi - lo) / G
    cdef cnp.ndarray[double, ndim=2] out = np.zeros((n, nb), dtype=np.float64)
    if k == 0:
        return out
    cdef double[::1] t = np.empty(m, dtype=np.float64)
    cdef double[::1] work = np.empty(m - 1, dtype=np.float64)
    cdef Py_ssize_t j
    cdef int i, d, cols
    cdef double xv, left, right

    for i in range(m):
        t[i] = lo + (i - k) * h
    for j in range(n):
        xv = xf[j]
        for i in range(m - 1):
            work[i] = 1.0 if (t[i] <= xv < t[i + 1]) else 0.0
        for d in range(1, k):
            cols = m - 1 - d
            for i in range(cols):
                left = (xv - t[i]) / (t[d + i] - t[i]) * work[i]
                right = (t[d + 1 + i] - xv) / (t[d + 1 + i] - t[1 + i]) * work[i + 1]
                work[i] = left + right
        for i in range(nb):
            out[j, i] = k * (work[i] / (t[i + k] - t[i]) - work[i + 1] / (t[i + k + 1] - t[i + 1]))
    return out


def rbf_features(object x, double lo, double hi, int G):
    """Gaussian bumps at G evenly spaced centers, width = center spacing."""
    if G < 2:
        raise ValueError(f"RBF grid needs G >= 2 centers, got G={G}")
    cdef double[::1] xf = _flat64(x)
    cdef Py_ssize_t n = xf.shape[0]
    cdef double spacing = (hi - lo) / (G - 1)
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, G), dtype=np.float64)
    cdef Py_ssize_t j
    cdef int i
    cdef double u
    for j in range(n):
        for i in range(G):
            u = (xf[j] - (lo + i * spacing)) / spacing
            out[j, i] = exp(-0.5 * u * u)
    return out


def rbf_features_grad(object x, double lo, double hi, int G):
    if G < 2:
        raise ValueError(f"RBF grid needs G >= 2 centers, got G={G}")
    cdef double[::1] xf = _flat64(x)
    cdef Py_ssize_t n = xf.shape[0]
    cdef double spacing = (hi - lo) / (G - 1)
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, G), dtype=np.float64)
    cdef Py_ssize_t j
    cdef int i
    cdef double u
    for j in range(n):
        for i in range(G):
            u = (xf[j] - (lo + i * spacing)) / spacing
            out[j, i] = exp(-0.5 * u * u) * (-u / spacing)
    return out


def fourier_features(object x, int g):
    """[cos(kx) for k=1..g] then [sin(kx) for k=1..g], per input scalar."""
    if g < 1:
        raise ValueError(f"need at least one harmonic, got g={g}")
    cdef double[::1] xf = _flat64(x)
    cdef Py_ssize_t n = xf.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, 2 * g), dtype=np.float64)
    cdef Py_ssize_t j
    cdef int i
    cdef double kx
    for j in range(n):
        for i in range(g):
            kx = xf[j] * (i + 1)
            out[j, i] = cos(kx)
            out[j, g + i] = sin(kx)
    return out


def fourier_features_grad(object x, int g):
    if g < 1:
        raise ValueError(f"need at least one harmonic, got g={g}")
    cdef double[::1] xf = _flat64(x)
    cdef Py_ssize_t n = xf.shape[0]
    cdef cnp.ndarray[double, ndim=2] out = np.empty((n, 2 * g), dtype=np.float64)
    cdef Py_ssize_t j
    cdef int i
    cdef double kx, kf
    for j in range(n):
        for i in range(g):
            kf = i + 1
            kx = xf[j] * kf
            out[j, i] = -kf * sin(kx)
            out[j, g + i] = kf * cos(kx)
    return out
