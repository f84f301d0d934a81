"""
Brute-force spectra of covariance operators on ``[0, 1]``.

The integral operator ``(K f)(t) = int_0^1 K(s, t) f(s) ds`` is
discretized on ``N`` equal cells and the eigenvalues of the resulting
symmetric matrix approximate the operator eigenvalues.  Two schemes are
available:

``midpoint``
    Nystrom with the midpoint rule, matrix ``K(t_i, t_j) / N``.  Errors are
    ``O(1/N)`` in the eigenvalues because ``|t - s|**(2H)`` has a kink on
    the diagonal.
``galerkin``
    Piecewise-constant Galerkin, matrix ``N * int_cell_i int_cell_j K``.
    The cell integrals are exact (closed-form antiderivatives), the error
    is ``O(1/N**2)`` and Richardson extrapolation of two grids removes the
    leading term.

Kernels::

    bm     min(s, t)
    fbm    (s**2H + t**2H - |s - t|**2H) / 2
    mixed  bm + fbm
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from ._io import write_csv
from .spectrum import HurstParam

__all__ = [
    "GridSpec",
    "DiscretizedOperator",
    "EigenSequence",
    "LiDistortion",
    "covariance_kernel",
    "build_covariance",
    "operator_spectrum",
    "numeric_eigenvalues",
    "richardson_eigenvalues",
    "jacobi_eigvalsh",
    "li_distortion",
    "spectrum_rows",
    "export_spectrum_csv",
]

log = logging.getLogger(__name__)

KINDS = ("bm", "fbm", "mixed")
SCHEMES = ("midpoint", "galerkin")


@dataclass(frozen=True)
class GridSpec:
    """Uniform midpoint grid on ``[0, 1]`` with ``N`` cells."""

    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"grid needs N >= 2 nodes, got {self.N!r}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def nodes(self):
        return (np.arange(self.N) + 0.5) / self.N

    @property
    def weights(self):
        return np.full(self.N, 1.0 / self.N)


@dataclass(frozen=True)
class DiscretizedOperator:
    """Symmetric matrix whose eigenvalues approximate the operator's.

    ``kernel`` holds kernel values at node pairs (midpoint) or cell
    averages (galerkin); ``matrix = kernel * h``.
    """

    kernel: np.ndarray = field(repr=False)
    grid: GridSpec
    kind: str
    H: float
    scheme: str = "midpoint"

    @property
    def matrix(self):
        return self.kernel * self.grid.h


@dataclass
class EigenSequence:
    """Positive non-increasing eigenvalues, index base 1.

    Parameters
    ----------
    values : array_like
        ``lambda_1 >= lambda_2 >= ... > 0``.
    tail : callable, optional
        Continuous model ``t -> lambda(t)`` valid for ``t`` beyond the
        last stored index; used for analytic tail corrections.
    tail_decay : float, optional
        Power ``d`` with ``tail(t) ~ t**-d``; must exceed 1.
    """

    values: np.ndarray
    tail: Callable[[np.ndarray], np.ndarray] | None = None
    tail_decay: float | None = None
    label: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("eigenvalues must form a non-empty 1-d array")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("eigenvalues must be finite and positive")
        if np.any(np.diff(v) > 1e-12 * v[:-1]):
            raise ValueError("eigenvalues must be non-increasing")
        self.values = v
        if self.tail is not None and (self.tail_decay is None or self.tail_decay <= 1):
            raise ValueError("a tail model needs a decay exponent > 1")

    def __len__(self):
        return self.values.size

    def __getitem__(self, n):
        """1-based access."""
        if n < 1:
            raise IndexError("eigenvalue index is 1-based")
        return self.values[n - 1]

    def scaled(self, c):
        tail = None if self.tail is None else (lambda t, f=self.tail: c * f(t))
        return EigenSequence(c * self.values, tail, self.tail_decay, self.label)

    def tail_sum_estimate(self):
        """Estimate of ``sum_{n > len} lambda_n`` from the tail model."""
        if self.tail is None:
            return math.nan
        from scipy import integrate
        n0 = len(self) + 0.5
        val = integrate.quad(lambda t: float(self.tail(t)), n0, np.inf, limit=200)[0]
        return val


def covariance_kernel(h, s, t, kind="mixed"):
    """Evaluate a covariance kernel at broadcastable arrays ``s``, ``t``."""
    if kind not in KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}; expected one of {KINDS}")
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    out = 0.0
    if kind in ("bm", "mixed"):
        out = out + np.minimum(s, t)
    if kind in ("fbm", "mixed"):
        q = 2.0 * HurstParam.of(h).H
        out = out + 0.5 * (s ** q + t ** q - np.abs(s - t) ** q)
    return out


def _cell_abs_power(N, p):
    # int_{cell i} int_{cell j} |s - t|**p ds dt via the second antiderivative
    h = 1.0 / N
    d = np.arange(N, dtype=float) * h
    F2 = lambda x: np.abs(x) ** (p + 2) / ((p + 1) * (p + 2))
    row = F2(d + h) + F2(d - h) - 2.0 * F2(d)
    # Toeplitz in |i - j|
    return linalg.toeplitz(row)


def _galerkin_kernel(h, N, kind):
    hcell = 1.0 / N
    a = np.arange(N) * hcell
    G = np.zeros((N, N))
    if kind in ("bm", "mixed"):
        L = ((a + hcell) ** 2 - a ** 2) / 2.0
        G += 0.5 * (hcell * (L[:, None] + L[None, :]) - _cell_abs_power(N, 1.0))
    if kind in ("fbm", "mixed"):
        q = 2.0 * HurstParam.of(h).H
        P = ((a + hcell) ** (q + 1) - a ** (q + 1)) / (q + 1)
        G += 0.5 * (hcell * (P[:, None] + P[None, :]) - _cell_abs_power(N, q))
    # cell averages
    return G / hcell ** 2


def build_covariance(h, grid, kind="mixed", scheme="midpoint"):
    """Assemble the discretized covariance operator.

    Parameters
    ----------
    h : HurstParam or float
        Hurst index (ignored by ``kind='bm'`` except for bookkeeping).
    grid : GridSpec or int
    kind : {'bm', 'fbm', 'mixed'}
    scheme : {'midpoint', 'galerkin'}

    Returns
    -------
    DiscretizedOperator
    """
    h = HurstParam.of(h)
    grid = grid if isinstance(grid, GridSpec) else GridSpec(grid)
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    if kind not in KINDS:
        raise ValueError(f"unknown kernel kind {kind!r}; expected one of {KINDS}")
    if scheme == "midpoint":
        t = grid.nodes
        K = covariance_kernel(h, t[:, None], t[None, :], kind)
    else:
        K = _galerkin_kernel(h, grid.N, kind)
    # exact symmetry regardless of rounding in the assembly
    K = 0.5 * (K + K.T)
    return DiscretizedOperator(K, grid, kind, h.H, scheme)


def jacobi_eigvalsh(A, tol=1e-12, max_sweeps=60):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Slow (``O(N**3)`` per sweep in pure numpy) but independent of LAPACK;
    intended for cross-checks on small matrices.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    scale = np.linalg.norm(A)
    if scale == 0:
        return np.zeros(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= tol * scale:
            return np.sort(np.diag(A))
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, tau) / (abs(tau) + math.hypot(1.0, tau))
                c = 1.0 / math.hypot(1.0, t)
                s = t * c
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
    raise np.linalg.LinAlgError("Jacobi iteration did not converge")


def _lapack_eigvalsh(A):
    return linalg.eigvalsh(A, check_finite=True)


EIGENSOLVERS = {"lapack": _lapack_eigvalsh, "jacobi": jacobi_eigvalsh}


def operator_spectrum(op, eigensolver="lapack"):
    """All eigenvalues of ``op.matrix`` in descending order."""
    M = op.matrix
    if M.ndim != 2 or M.shape[0] != M.shape[1] or not np.array_equal(M, M.T):
        raise ValueError("operator matrix must be square and exactly symmetric")
    solve = EIGENSOLVERS[eigensolver] if isinstance(eigensolver, str) else eigensolver
    try:
        ev = np.asarray(solve(M), dtype=float)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(f"eigensolver failed to converge: {exc}") from exc
    return ev[::-1]


def numeric_eigenvalues(op, count, eigensolver="lapack", tail=None, tail_decay=None):
    """Leading ``count`` eigenvalues of a discretized operator.

    Parameters
    ----------
    op : DiscretizedOperator
    count : int
        Number of eigenvalues; at most ``N // 4``, beyond which the
        discretization error is no longer small.
    eigensolver : {'lapack', 'jacobi'} or callable
        Dense symmetric solver returning ascending eigenvalues.

    Returns
    -------
    EigenSequence
    """
    if count < 1 or count > op.grid.N // 4:
        raise ValueError(
            f"count must be in [1, N/4] = [1, {op.grid.N // 4}], got {count}")
    ev = operator_spectrum(op, eigensolver)[:count]
    if np.any(ev <= 0):
        raise ValueError("non-positive eigenvalue among the leading ones; "
                         "kernel matrix is not numerically positive definite")
    return EigenSequence(ev, tail, tail_decay, label=f"{op.kind}:{op.scheme}:N={op.grid.N}")


def richardson_eigenvalues(h, N, count, kind="mixed", eigensolver="lapack"):
    """Galerkin eigenvalues on ``N`` and ``2N`` cells, extrapolated.

    The Galerkin error is ``c / N**2 + o(N**-2)``, so
    ``(4 lam_{2N} - lam_N) / 3`` cancels the leading term.
    """
    if count < 1 or count > N // 4:
        raise ValueError(f"count must be in [1, N/4] = [1, {N // 4}], got {count}")
    e1 = operator_spectrum(build_covariance(h, N, kind, "galerkin"), eigensolver)[:count]
    e2 = operator_spectrum(build_covariance(h, 2 * N, kind, "galerkin"), eigensolver)[:count]
    return EigenSequence((4.0 * e2 - e1) / 3.0, label=f"{kind}:richardson:N={N},{2 * N}")


@dataclass(frozen=True)
class LiDistortion:
    value: float
    log_value: float
    partial_logs: np.ndarray = field(repr=False)
    tail_estimate: float
    converged: bool

    def __float__(self):
        return self.value


def li_distortion(target, model, details=False):
    """Distortion constant ``prod_n model_n / target_n``.

    The product converges when ``sum |1 - target_n / model_n| < inf``.
    Only the provided terms enter the product; the remaining tail of
    ``log`` ratios is estimated by a power-law fit to the last half of the
    terms and logged.  If that fit decays no faster than ``1/n`` the series
    is flagged as divergent.

    Returns
    -------
    float, or LiDistortion when ``details`` is true.
    """
    t = np.asarray(getattr(target, "values", target), dtype=float)
    m = np.asarray(getattr(model, "values", model), dtype=float)
    if t.shape != m.shape or t.ndim != 1:
        raise ValueError("sequences must be 1-d and of equal length")
    if np.any(t <= 0) or np.any(m <= 0):
        raise ValueError("sign mismatch: all terms must be positive")
    logs = np.log(m) - np.log(t)
    partial = np.cumsum(logs)
    n = np.arange(1, t.size + 1)
    dev = np.abs(1.0 - t / m)
    tail, converged = 0.0, True
    half = slice(t.size // 2, None)
    if t.size >= 8 and np.all(dev[half] > 0):
        slope, icpt = np.polyfit(np.log(n[half]), np.log(np.abs(logs[half]) + 1e-300), 1)
        if slope >= -1.0:
            converged = False
            tail = math.inf
        else:
            # int_{N+1/2}^inf C x**slope dx with the sign of the last terms
            N = t.size + 0.5
            tail = math.copysign(math.exp(icpt) * N ** (slope + 1) / -(slope + 1),
                                 logs[-1])
    if not converged:
        log.warning("li_distortion: |1 - ratio| not summable on the provided terms")
    else:
        log.info("li_distortion: %d terms, tail log estimate %.3e", t.size, tail)
    res = LiDistortion(float(np.exp(partial[-1])), float(partial[-1]),
                       partial, float(tail), converged)
    return res if details else res.value


def spectrum_rows(h, numeric=None, n=None):
    """Rows ``(n, nu, lambda_closed, lambda_numeric, rel_err)``."""
    from .spectrum import mixed_eigenvalues, nu_mixed
    h = HurstParam.of(h)
    if n is None:
        n = np.arange(1, len(numeric) + 1)
    n = np.asarray(n, dtype=int)
    nu = np.asarray(nu_mixed(h, n), dtype=float)
    closed = mixed_eigenvalues(h, n)
    rows = []
    for i, k in enumerate(n):
        if numeric is not None:
            lam_num = numeric[k]
            rel = abs(closed[i] - lam_num) / lam_num
        else:
            lam_num = rel = math.nan
        rows.append((int(k), nu[i], closed[i], lam_num, rel))
    return rows


SPECTRUM_HEADER = ("n", "lambda_numeric", "lambda_closed_form", "rel_err")


def export_spectrum_csv(path, h, numeric, n=None):
    """Write ``n, lambda_numeric, lambda_closed_form, rel_err`` rows."""
    rows = [(k, num, cf, rel) for k, _, cf, num, rel in spectrum_rows(h, numeric, n)]
    return write_csv(path, SPECTRUM_HEADER, rows)
