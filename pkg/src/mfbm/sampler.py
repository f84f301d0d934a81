"""
Path generation and Monte Carlo small-ball estimators.

Two estimators of ``P(||X||_2**2 <= r)`` are provided:

``path-l2``
    Exact finite-dimensional paths on the midpoint grid from a Cholesky
    factor of the covariance matrix; the squared norm uses midpoint
    weights ``1/N``.
``chisq``
    The Karhunen-Loeve form ``sum_n lambda_n Z_n**2`` with ``Z_n``
    standard normal, truncated after the supplied eigenvalues.

With midpoint weights the squared path norm has exactly the law of the
chi-square series over the eigenvalues of ``K / N``, so the two estimators
are comparable without discretization mismatch.

All randomness comes from a counter-based stream (see
:mod:`mfbm._kernels_py`), so sample ``i`` is reproducible independently of
batching and of the kernel backend.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from . import kernels
from ._io import write_csv, write_json
from .oracle import EigenSequence, GridSpec, build_covariance
from .spectrum import HurstParam

__all__ = [
    "MCConfig",
    "MCEstimate",
    "PathBatch",
    "cholesky_factor",
    "cholesky_paths",
    "kl_paths",
    "chisq_smallball",
    "path_smallball",
    "export_paths_csv",
]

log = logging.getLogger(__name__)

VARIANTS = ("path-l2", "chisq")
MIN_SAMPLES = 100
SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class MCConfig:
    """Monte Carlo settings.

    ``grid`` is the number of midpoint cells for path estimators or the
    number of retained modes for the chi-square estimator.
    """

    samples: int = 100_000
    seed: int = 0
    grid: int = 512
    variant: str = "path-l2"
    batch: int = 32_768

    def __post_init__(self):
        if int(self.samples) != self.samples or self.samples < MIN_SAMPLES:
            raise ValueError(f"sample count must be an integer >= {MIN_SAMPLES}, got {self.samples!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed <= SEED_MASK:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        g = self.grid.N if isinstance(self.grid, GridSpec) else self.grid
        if int(g) != g or g < 2:
            raise ValueError(f"grid must be an integer >= 2, got {self.grid!r}")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.batch < 1:
            raise ValueError("batch must be positive")
        object.__setattr__(self, "samples", int(self.samples))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "grid", int(g))

    @property
    def grid_spec(self):
        return GridSpec(self.grid)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class MCEstimate:
    """Binomial estimate with its standard error ``sqrt(p (1 - p) / m)``."""

    probability: float
    std_error: float
    samples: int
    hits: int
    config: MCConfig
    tail_bound: float = 0.0
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_hits(cls, hits, cfg, **kw):
        m = cfg.samples
        p = hits / m
        return cls(p, math.sqrt(p * (1.0 - p) / m), m, int(hits), cfg, **kw)

    def interval(self, z=1.96):
        return (max(self.probability - z * self.std_error, 0.0),
                min(self.probability + z * self.std_error, 1.0))

    def to_dict(self):
        d = {"probability": self.probability, "std_error": self.std_error,
             "samples": self.samples, "hits": self.hits,
             "ci95": list(self.interval()), "tail_bound": self.tail_bound,
             "config": self.config.to_dict()}
        d.update(self.extra)
        return d


def _batches(m, size):
    for start in range(0, m, size):
        yield start, min(size, m - start)


# --------------------------------------------------------------------------
# paths


def cholesky_factor(h, grid):
    """Lower Cholesky factor of the mixed covariance on the midpoint grid.

    If the factorization fails, ``1e-12 * trace / N`` is added to the
    diagonal once and the jitter is logged.

    Returns
    -------
    L : ndarray
    jitter : float
    """
    grid = grid if isinstance(grid, GridSpec) else GridSpec(grid)
    K = build_covariance(h, grid, "mixed").kernel
    try:
        return linalg.cholesky(K, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        jitter = 1e-12 * np.trace(K) / grid.N
        log.warning("covariance not numerically positive definite at N=%d; "
                    "adding diagonal jitter %.3e", grid.N, jitter)
        L = linalg.cholesky(K + jitter * np.eye(grid.N), lower=True, check_finite=False)
        return L, jitter


@dataclass(frozen=True)
class PathBatch:
    """Paths ``values[i, j] = X_i(t_j)`` on the midpoint nodes."""

    t: np.ndarray
    values: np.ndarray
    seed: int
    jitter: float = 0.0


def cholesky_paths(h, grid, cfg, count=None, start=0):
    """Sample mixed fBm paths exactly on the grid nodes.

    Parameters
    ----------
    h : HurstParam or float
    grid : GridSpec or int
    cfg : MCConfig
        Supplies the seed; ``count`` defaults to ``cfg.samples``.
    count, start : int
        Sample indices ``start .. start + count - 1`` of the stream.
    """
    grid = grid if isinstance(grid, GridSpec) else GridSpec(grid)
    count = cfg.samples if count is None else int(count)
    L, jitter = cholesky_factor(h, grid)
    Z = np.empty((count, grid.N))
    kernels.fill_normals(cfg.seed, start, Z)
    return PathBatch(grid.nodes, Z @ L.T, cfg.seed, jitter)


def kl_paths(h, grid, cfg, modes, count=None, start=0):
    """Truncated Karhunen-Loeve paths from discrete eigenpairs.

    Uses the leading ``modes`` eigenpairs of the midpoint operator;
    ``X(t_j) = sum_k sqrt(lambda_k) Z_k v_k(j) sqrt(N)``.
    """
    grid = grid if isinstance(grid, GridSpec) else GridSpec(grid)
    if not 1 <= modes <= grid.N:
        raise ValueError(f"modes must lie in [1, {grid.N}], got {modes}")
    count = cfg.samples if count is None else int(count)
    op = build_covariance(h, grid, "mixed")
    w, V = linalg.eigh(op.matrix, subset_by_index=(grid.N - modes, grid.N - 1))
    w, V = w[::-1], V[:, ::-1]
    Z = np.empty((count, modes))
    kernels.fill_normals(cfg.seed, start, Z)
    X = (Z * np.sqrt(np.clip(w, 0, None))) @ V.T * math.sqrt(grid.N)
    return PathBatch(grid.nodes, X, cfg.seed)


def export_paths_csv(path, batch):
    """Long format: one row per ``(path, t, value)``."""
    m, n = batch.values.shape
    rows = ((i, batch.t[j], batch.values[i, j]) for i in range(m) for j in range(n))
    return write_csv(path, ("path", "t", "value"), rows)


# --------------------------------------------------------------------------
# estimators


def chisq_smallball(eigs, r, cfg):
    """Estimate ``P(sum_n lambda_n Z_n**2 <= r)`` over the stored terms.

    The first ``min(cfg.grid, len(eigs))`` eigenvalues are used; the
    neglected mass ``sum_{n > n*} lambda_n`` (stored values plus the tail
    model, if any) is reported as ``tail_bound``.  Dropping nonnegative
    terms can only enlarge the event, so the estimate is biased upward by
    at most ``P(r - tail_bound < S <= r)``.
    """
    if not r > 0:
        raise ValueError(f"radius must be positive, got {r!r}")
    if not isinstance(eigs, EigenSequence):
        eigs = EigenSequence(np.asarray(eigs, dtype=float))
    n_star = min(cfg.grid, len(eigs))
    lam = np.ascontiguousarray(eigs.values[:n_star])
    tail = float(np.sum(eigs.values[n_star:]))
    if eigs.tail is not None:
        tail += eigs.tail_sum_estimate()
    hits = 0
    buf = np.empty(cfg.batch)
    for start, m in _batches(cfg.samples, cfg.batch):
        out = buf[:m]
        kernels.chisq_sums(cfg.seed, start, lam, out)
        hits += int(np.count_nonzero(out <= r))
    return MCEstimate.from_hits(hits, cfg, tail_bound=tail,
                                extra={"estimator": "chisq", "n_star": n_star,
                                       "backend": kernels.BACKEND})


def path_smallball(h, eps, cfg):
    """Estimate ``P(||X||_2 <= eps)`` for mixed fBm from Cholesky paths.

    Counts are integers, so the aggregate is exact and independent of the
    batch order.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps!r}")
    h = HurstParam.of(h)
    grid = cfg.grid_spec
    L, jitter = cholesky_factor(h, grid)
    LT = np.ascontiguousarray(L.T)
    w = grid.weights
    r = eps * eps
    hits = 0
    for start, m in _batches(cfg.samples, cfg.batch):
        Z = np.empty((m, grid.N))
        kernels.fill_normals(cfg.seed, start, Z)
        X = np.ascontiguousarray(Z @ LT)
        out = np.empty(m)
        kernels.row_sq_norms(X, w, out)
        hits += int(np.count_nonzero(out <= r))
    return MCEstimate.from_hits(hits, cfg, extra={"estimator": "path-l2", "H": h.H,
                                                  "eps": eps, "jitter": jitter,
                                                  "backend": kernels.BACKEND})


def write_estimate_json(path, est):
    return write_json(path, est.to_dict())
