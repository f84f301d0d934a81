"""Pure-numpy reference implementation of the sampling kernels.

The Gaussian stream is counter based.  The standard normal with index
``j`` of sample ``i`` is derived from the pair counter
``p = (i << 32) | (j >> 1)``: two SplitMix64 outputs at stream positions
``2p`` and ``2p + 1`` give uniforms ``u1 in (0, 1]`` and ``u2 in [0, 1)``,
and Box-Muller yields ``R cos(2 pi u2)`` for even ``j`` and
``R sin(2 pi u2)`` for odd ``j`` with ``R = sqrt(-2 log u1)``.
"""
from __future__ import annotations

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO53 = 2.0 ** -53
TWO_PI = 2.0 * np.pi

BACKEND = "python"


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def splitmix(seed, counters):
    """SplitMix64 output at the given stream positions."""
    k = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix(np.uint64(seed) + (k + np.uint64(1)) * GOLDEN)


def fill_normals(seed, start, out):
    """Fill ``out[i, j]`` with normal ``j`` of sample ``start + i``."""
    m, d = out.shape
    npair = (d + 1) // 2
    i = np.arange(start, start + m, dtype=np.uint64)[:, None]
    j = np.arange(npair, dtype=np.uint64)[None, :]
    with np.errstate(over="ignore"):
        p = (i << np.uint64(32)) | j
        x1 = splitmix(seed, p * np.uint64(2))
        x2 = splitmix(seed, p * np.uint64(2) + np.uint64(1))
    u1 = ((x1 >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO53
    u2 = (x2 >> np.uint64(11)).astype(np.float64) * _TWO53
    R = np.sqrt(-2.0 * np.log(u1))
    ang = TWO_PI * u2
    out[:, 0::2] = (R * np.cos(ang))[:, : (d + 1) // 2]
    out[:, 1::2] = (R * np.sin(ang))[:, : d // 2]
    return out


def chisq_sums(seed, start, lam, out):
    """``out[i] = sum_j lam[j] * Z_ij**2`` for samples ``start + i``."""
    m = out.shape[0]
    z = np.empty((m, lam.shape[0]))
    fill_normals(seed, start, z)
    np.dot(z * z, lam, out=out)
    return out


def row_sq_norms(X, w, out):
    """``out[i] = sum_j w[j] * X[i, j]**2``."""
    np.dot(X * X, w, out=out)
    return out
