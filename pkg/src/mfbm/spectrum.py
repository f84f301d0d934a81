"""
Closed-form spectral approximations for Brownian motion, fractional
Brownian motion and their independent sum (mixed fBm).

Frequencies ``nu`` and eigenvalues ``lambda`` of the mixed covariance
operator on ``[0, 1]`` are linked by

.. math::
    \\lambda = \\nu^{-2} + \\kappa_\\alpha \\nu^{\\alpha - 3},
    \\qquad \\kappa_\\alpha = \\Gamma(2H+1) \\sin(\\pi H), \\quad \\alpha = 2 - 2H,

and the leading frequency is that of the rougher component,
``nu_n = nu_n(min(H, 1/2))``.  The residual ``O(n**-|2H-1|)`` of that
frequency approximation is dropped throughout; tests assert its decay
rate rather than equality.

The module also evaluates the phase function ``theta`` of the mixed
symbol on the positive half-line and its integrals, which enter the
second order frequency shift and obey explicit convergence rates.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .numcore import (QuadratureSpec, expand_bracket, integrate_improper,
                      solve_monotone)

__all__ = [
    "Regime",
    "HurstParam",
    "MixedEigenResult",
    "nu_fbm",
    "lambda_fbm",
    "lambda_bm",
    "nu_mixed",
    "lambda_mixed",
    "mixed_eigenvalues",
    "lambda_to_nu",
    "mixed_expansion_coeffs",
    "theta",
    "b_alpha_nu",
    "b_alpha_limit",
    "arg_x",
    "frequency_shift",
    "q_alpha",
    "q_alpha_arcsin",
]


class Regime(str, enum.Enum):
    SUBHALF = "subhalf"
    HALF = "half"
    SUPERHALF = "superhalf"


@dataclass(frozen=True)
class HurstParam:
    """Validated Hurst index.

    Parameters
    ----------
    H : float
        Hurst index in the open interval (0, 1).

    Attributes
    ----------
    alpha : float
        ``2 - 2H``.
    regime : Regime
        Position of ``H`` relative to 1/2.
    """

    H: float

    def __post_init__(self):
        H = float(self.H)
        if not (0.0 < H < 1.0) or not math.isfinite(H):
            raise ValueError(f"Hurst index must lie in (0, 1), got H={self.H!r}")
        object.__setattr__(self, "H", H)

    @classmethod
    def of(cls, h):
        return h if isinstance(h, HurstParam) else cls(h)

    @property
    def alpha(self):
        return 2.0 - 2.0 * self.H

    @property
    def regime(self):
        if self.H < 0.5:
            return Regime.SUBHALF
        if self.H > 0.5:
            return Regime.SUPERHALF
        return Regime.HALF

    @cached_property
    def kappa(self):
        """``Gamma(2H+1) sin(pi H)``; finite through ``alpha = 1``."""
        return math.gamma(2.0 * self.H + 1.0) * math.sin(math.pi * self.H)

    @property
    def rough(self):
        """Hurst index of the rougher component, ``min(H, 1/2)``."""
        return min(self.H, 0.5)


@dataclass(frozen=True)
class MixedEigenResult:
    n: int
    nu: float
    lam: float

    @property
    def lambda_(self):
        return self.lam


def _check_n(n):
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("eigenvalue index must be >= 1")
    return n.astype(float)


def nu_fbm(h, n):
    """Leading fBm frequency ``(n - 1/2) pi - (H - 1/2)**2 / (H + 1/2) * pi / 2``.

    Drops the ``O(1/n)`` remainder.  Vectorized over ``n``.
    """
    h = HurstParam.of(h)
    nf = _check_n(n)
    H = h.H
    out = (nf - 0.5) * math.pi - (H - 0.5) ** 2 / (H + 0.5) * math.pi / 2
    return out if np.ndim(out) else float(out)


def lambda_fbm(h, n):
    """fBm eigenvalue ``kappa / nu_n**(2H+1)``."""
    h = HurstParam.of(h)
    return h.kappa / np.power(nu_fbm(h, n), 2.0 * h.H + 1.0)


def lambda_bm(n):
    """Exact BM eigenvalue ``1 / ((n - 1/2) pi)**2``."""
    nf = _check_n(n)
    out = 1.0 / ((nf - 0.5) * math.pi) ** 2
    return out if np.ndim(out) else float(out)


def nu_mixed(h, n):
    """Mixed fBm frequency ``nu_n(min(H, 1/2))``.

    The ``O(n**-|2H-1|)`` correction is dropped; at ``H = 1/2`` this is the
    exact BM frequency ``(n - 1/2) pi``.
    """
    h = HurstParam.of(h)
    return nu_fbm(HurstParam(h.rough), n)


def _lambda_of_nu(h, nu):
    return nu ** -2.0 + h.kappa * nu ** (h.alpha - 3.0)


def lambda_mixed(h, n):
    """Mixed fBm eigenvalue approximation for a single index.

    Returns
    -------
    MixedEigenResult
        ``lam = 1/nu**2 + kappa * nu**-(2H+1)`` at ``nu = nu_mixed(h, n)``.
    """
    h = HurstParam.of(h)
    if int(n) != n:
        raise ValueError("index must be an integer")
    nu = nu_mixed(h, int(n))
    return MixedEigenResult(int(n), nu, float(_lambda_of_nu(h, nu)))


def mixed_eigenvalues(h, n):
    """Vectorized ``lambda_mixed(h, n).lam`` over an index array."""
    h = HurstParam.of(h)
    return _lambda_of_nu(h, np.asarray(nu_mixed(h, np.asarray(n)), dtype=float))


def lambda_to_nu(h, lam, tol=1e-13):
    """Invert ``lam = nu**-2 + kappa * nu**(alpha-3)`` for ``nu > 0``.

    The right side is strictly decreasing in ``nu`` so the root is unique.
    The search is carried out in ``log nu`` with a bracket grown until a
    sign change appears.
    """
    h = HurstParam.of(h)
    lam = float(lam)
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError(f"lambda must be positive and finite, got {lam!r}")

    def g(s):
        return math.log(_lambda_of_nu(h, math.exp(s))) - math.log(lam)

    # both terms are power laws in nu, so the crude inverse of the larger
    # one is within a factor of two of the root
    s0 = min(-0.5 * math.log(lam),
             math.log(h.kappa / lam) / (3.0 - h.alpha))
    lo, hi = expand_bracket(g, s0 - 1.0, s0 + 1.0, log_space=True)
    return math.exp(solve_monotone(g, (lo, hi), tol=tol))


def mixed_expansion_coeffs(h):
    """Coefficients of the four-term expansion for ``H > 1/2``.

    ``lam_n = a1 n**-2 + a2 n**(alpha-3) + a3 n**-3 + a4 n**(alpha-4)``
    plus ``O(n**(2 alpha - 5))``, from Taylor expanding ``nu_n**-2`` and
    ``nu_n**(alpha-3)`` about ``nu_n = n pi``.
    """
    h = HurstParam.of(h)
    if not h.H > 0.5:
        raise ValueError(f"expansion requires H > 1/2, got H={h.H}")
    a = h.alpha
    pi_d = math.pi ** (3.0 - a)
    a1 = 1.0 / math.pi ** 2
    a2 = h.kappa / pi_d
    a3 = 1.0 / math.pi ** 2
    a4 = h.kappa * (3.0 - a) / (2.0 * pi_d)
    return a1, a2, a3, a4


def q_alpha(h):
    """Frequency offset for ``H < 1/2``: ``nu_n = pi n - q pi / 2 + ...``.

    Chosen so that the offset matches the fBm frequency at ``min(H, 1/2)``,
    ``q = 1 + (1 - alpha)**2 / (2 (3 - alpha))``.
    """
    a = HurstParam.of(h).alpha
    return 1.0 + (1.0 - a) ** 2 / (2.0 * (3.0 - a))


def q_alpha_arcsin(h, ell):
    """Arcsine form ``1 - (alpha-1)/2 - (2/pi) arcsin(l / sqrt(1 + l**2))``.

    Kept for comparison only; ``ell`` is an external input.  With
    ``ell = b_alpha_limit(h)`` it reproduces :func:`q_alpha`.
    """
    a = HurstParam.of(h).alpha
    return 1.0 - (a - 1.0) / 2.0 - (2.0 / math.pi) * math.asin(ell / math.hypot(1.0, ell))


# --------------------------------------------------------------------------
# phase of the mixed symbol


def _theta_scaled(s, nu, h):
    # theta(nu * s); vectorized in s
    a = h.alpha
    S = math.sin((1.0 - a) * math.pi / 2.0)
    C = math.cos((1.0 - a) * math.pi / 2.0)
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        p3 = s ** (3.0 - a)
        p1 = s ** (1.0 - a)
    den = nu ** (1.0 - a) / h.kappa * (p3 + p1) + p3 + C
    # the denominator stays positive for s > 0, so arctan2 and arctan agree
    return np.arctan2(S, den)


def theta(t, nu, h):
    """Phase ``theta(t)`` of the mixed symbol on the positive half-line.

    Parameters
    ----------
    t : float or array_like
        Positive argument.
    nu : float
        Frequency parameter.
    h : HurstParam or float

    Returns
    -------
    float or ndarray
        Continuous branch vanishing at infinity, with the sign of
        ``sin((1 - alpha) pi / 2)``.
    """
    h = HurstParam.of(h)
    if nu <= 0:
        raise ValueError("nu must be positive")
    out = _theta_scaled(np.asarray(t, dtype=float) / nu, nu, h)
    return out if np.ndim(out) else float(out)


_STRUCT_SPEC = QuadratureSpec(abs_tol=1e-14, rel_tol=1e-11, limit=1000)


def b_alpha_nu(nu, h, spec=None):
    """``(1/pi) * integral_0^inf theta(nu tau) d tau``.

    ``theta(nu tau)`` decays like ``tau**(alpha-3)`` so the integral is
    finite for every ``alpha < 2``.
    """
    h = HurstParam.of(h)
    if h.H == 0.5:
        return 0.0
    spec = spec or QuadratureSpec(_STRUCT_SPEC.abs_tol, _STRUCT_SPEC.rel_tol,
                                  _STRUCT_SPEC.limit, decay=3.0 - h.alpha)
    val = integrate_improper(lambda s: float(_theta_scaled(s, nu, h)), 0.0, spec)
    return val / math.pi


def b_alpha_limit(h):
    """Large-``nu`` limit of ``b_alpha_nu`` for ``alpha >= 1``.

    ``sin(pi/(3-alpha) * (1-alpha)/2) / sin(pi/(3-alpha))``; the limit
    ``alpha -> 2`` is singular and rejected.
    """
    h = HurstParam.of(h)
    if h.H > 0.5:
        raise ValueError("b_alpha limit is defined for H <= 1/2 (alpha >= 1)")
    a = h.alpha
    if a >= 2.0:
        raise ValueError("alpha = 2 is a singular boundary")
    return math.sin(math.pi / (3.0 - a) * (1.0 - a) / 2.0) / math.sin(math.pi / (3.0 - a))


def arg_x(nu, h, spec=None):
    """Argument of the canonical factor on the imaginary axis at ``i nu``.

    ``(1/pi) * integral_0^inf theta(nu s) / (1 + s**2) ds``.
    """
    h = HurstParam.of(h)
    if h.H == 0.5:
        return 0.0
    spec = spec or QuadratureSpec(_STRUCT_SPEC.abs_tol, _STRUCT_SPEC.rel_tol,
                                  _STRUCT_SPEC.limit, decay=5.0 - h.alpha)
    val = integrate_improper(
        lambda s: float(_theta_scaled(s, nu, h)) / (1.0 + s * s), 0.0, spec)
    return val / math.pi


def frequency_shift(nu, h):
    """Second order frequency shift ``g(nu) = -2 arg X(i nu) + arctan b(nu)``.

    Frequencies then satisfy ``nu_n = (n - 1/2) pi + g(nu_n) + O(1/n)``.
    As ``nu -> inf`` the shift tends to the constant offset of
    :func:`nu_mixed`.
    """
    h = HurstParam.of(h)
    return -2.0 * arg_x(nu, h) + math.atan(b_alpha_nu(nu, h))
