"""Backend selection for the sampling kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``MFBM_BACKEND=python`` is set, the numpy reference
implementation is used.  Both produce the same Gaussian stream up to
last-ulp differences between the C library and numpy transcendental
functions.
"""
from __future__ import annotations

import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)


def _load(name=None):
    name = (name or os.environ.get("MFBM_BACKEND", "auto")).lower()
    if name not in ("auto", "cython", "python"):
        raise ValueError(f"MFBM_BACKEND must be auto, cython or python, got {name!r}")
    if name == "python":
        return _kernels_py
    try:
        from . import _kernels
    except ImportError:
        if name == "cython":
            raise
        log.debug("compiled kernels unavailable, using numpy fallback")
        return _kernels_py
    return _kernels


def backend(name=None):
    """Kernel module for ``name`` (``'auto'``, ``'cython'`` or ``'python'``)."""
    return _load(name)


_impl = _load()
BACKEND = _impl.BACKEND
splitmix = _impl.splitmix
fill_normals = _impl.fill_normals
chisq_sums = _impl.chisq_sums
row_sq_norms = _impl.row_sq_norms
