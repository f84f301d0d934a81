# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled sampling kernels; same stream layout as ``_kernels_py``."""
from libc.math cimport sqrt, log, cos, sin, M_PI
from libc.stdint cimport uint64_t, int64_t

BACKEND = "cython"

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline uint64_t _at(uint64_t seed, uint64_t k) nogil:
    return _mix(seed + (k + 1) * GOLDEN)


cdef inline void _pair(uint64_t seed, uint64_t p, double* a, double* b) nogil:
    cdef uint64_t x1 = _at(seed, 2 * p)
    cdef uint64_t x2 = _at(seed, 2 * p + 1)
    cdef double u1 = (<double>(x1 >> 11) + 1.0) * TWO53
    cdef double u2 = <double>(x2 >> 11) * TWO53
    cdef double R = sqrt(-2.0 * log(u1))
    cdef double ang = 2.0 * M_PI * u2
    a[0] = R * cos(ang)
    b[0] = R * sin(ang)


def splitmix(uint64_t seed, counters):
    import numpy as np
    k = np.asarray(counters, dtype=np.uint64)
    out = np.empty(k.shape, dtype=np.uint64)
    cdef uint64_t[::1] kv = k.ravel()
    cdef uint64_t[::1] ov = out.ravel()
    cdef Py_ssize_t i
    for i in range(kv.shape[0]):
        ov[i] = _at(seed, kv[i])
    return out


def fill_normals(uint64_t seed, int64_t start, double[:, ::1] out):
    cdef Py_ssize_t m = out.shape[0], d = out.shape[1], i, j
    cdef uint64_t p
    cdef double a, b
    with nogil:
        for i in range(m):
            for j in range(0, d, 2):
                p = ((<uint64_t>(start + i)) << 32) | <uint64_t>(j >> 1)
                _pair(seed, p, &a, &b)
                out[i, j] = a
                if j + 1 < d:
                    out[i, j + 1] = b
    return out.base


def chisq_sums(uint64_t seed, int64_t start, double[::1] lam, double[::1] out):
    cdef Py_ssize_t m = out.shape[0], d = lam.shape[0], i, j
    cdef uint64_t p
    cdef double a, b, s
    with nogil:
        for i in range(m):
            s = 0.0
            for j in range(0, d, 2):
                p = ((<uint64_t>(start + i)) << 32) | <uint64_t>(j >> 1)
                _pair(seed, p, &a, &b)
                s += lam[j] * a * a
                if j + 1 < d:
                    s += lam[j + 1] * b * b
            out[i] = s
    return out.base


def row_sq_norms(double[:, ::1] X, double[::1] w, double[::1] out):
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1], i, j
    cdef double s
    with nogil:
        for i in range(m):
            s = 0.0
            for j in range(d):
                s += w[j] * X[i, j] * X[i, j]
            out[i] = s
    return out.base
