"""
Foundational numerics: gamma function, improper-integral quadrature,
bracketed root solving and truncated fractional power series.

A fractional power series is a truncated expansion

.. math::
    a(r) = \\sum_{j=0}^{M} a_j r^{j\\delta}

in a fixed step :math:`\\delta > 0`.  Arithmetic is carried out on the
coefficient vectors; the step only has to agree between operands.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize

__all__ = [
    "QuadratureSpec",
    "QuadratureError",
    "RootError",
    "FractionalSeries",
    "log_gamma",
    "gamma",
    "integrate_improper",
    "solve_monotone",
    "expand_bracket",
    "series_mul",
    "series_pow",
]

DEFAULT_REL_TOL = 1e-10
DEFAULT_ROOT_TOL = 1e-12


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class RootError(ValueError):
    """A bracketed root search could not be carried out."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tolerances for :func:`integrate_improper`.

    ``decay`` is the algebraic decay exponent ``p`` of the integrand tail,
    ``f(t) ~ t**-p``.  When ``p > 1`` the tail is mapped onto a bounded
    interval by ``t = T * s**(-1/(p-1))`` so that the transformed integrand
    stays bounded at ``s = 0``.
    """

    abs_tol: float = 0.0
    rel_tol: float = DEFAULT_REL_TOL
    limit: int = 500
    decay: float | None = None

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.abs_tol == 0 and self.rel_tol == 0:
            raise ValueError("at least one tolerance must be positive")
        if self.limit < 1:
            raise ValueError("limit must be a positive integer")

    def tightened(self, factor):
        return QuadratureSpec(self.abs_tol * factor, self.rel_tol * factor,
                              self.limit, self.decay)


def log_gamma(x):
    """Natural log of the gamma function for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x!r}")
    return math.lgamma(x)


def gamma(x):
    return math.gamma(x)


def _quad(f, a, b, spec, **kw):
    val, err, info = integrate.quad(
        f, a, b, epsabs=spec.abs_tol, epsrel=spec.rel_tol,
        limit=spec.limit, full_output=1, **kw)[:3]
    if not np.isfinite(val):
        raise QuadratureError(f"non-finite integral on [{a}, {b}]")
    target = max(spec.abs_tol, spec.rel_tol * abs(val))
    # QUADPACK flags round-off near machine precision even when converged
    if err > 50 * target and err > 1e-300:
        raise QuadratureError(
            f"quadrature on [{a}, {b}] did not converge: estimate {val:.6e}, "
            f"error {err:.2e} after {info['neval']} evaluations")
    return val, err


def integrate_improper(f: Callable[[float], float], lower: float,
                       spec: QuadratureSpec | None = None,
                       singular_power: float | None = None,
                       breakpoints: Sequence[float] = ()) -> float:
    """Integrate ``f`` over ``[lower, inf)``.

    Parameters
    ----------
    f : callable
        Integrand, continuous on ``(lower, inf)``.
    lower : float
        Lower limit, ``lower >= 0``.
    spec : QuadratureSpec, optional
        Tolerances and the tail decay hint.
    singular_power : float, optional
        If ``f(t) ~ (t - lower)**singular_power`` near the lower limit with
        ``singular_power > -1``, the head interval is integrated with the
        matching algebraic weight.
    breakpoints : sequence of float, optional
        Points past ``lower + 1`` where the integrand changes scale (a
        knee).  Finite pieces between them are integrated directly and the
        algebraic tail map starts at the last one.

    Returns
    -------
    float

    Raises
    ------
    QuadratureError
        If the adaptive rule does not converge within ``spec.limit``
        subdivisions.
    """
    spec = spec or QuadratureSpec()
    if lower < 0:
        raise ValueError("lower limit must be nonnegative")

    def tail(T):
        p = spec.decay
        if p is None or p <= 1:
            return _quad(f, T, np.inf, spec)[0]
        q = 1.0 / (p - 1.0)

        def g(s):
            if s <= 0.0:
                return 0.0 if p > 1 else f(np.inf)
            t = T * s ** (-q)
            return f(t) * q * t / s
        return _quad(g, 0.0, 1.0, spec)[0]

    cuts = sorted(b for b in breakpoints if b > lower + 1.0 and np.isfinite(b))

    def rest(a):
        # a -> breakpoints -> tail
        total = 0.0
        for b in cuts:
            if b > a:
                total += _quad(f, a, b, spec)[0]
                a = b
        return total + tail(a)

    if lower > 0 and singular_power is None and not cuts:
        return tail(lower)
    head_end = lower + 1.0
    if singular_power is not None:
        if singular_power <= -1:
            raise ValueError("singular_power must exceed -1")
        def regular(t):
            # the rule samples the endpoint; step off it to the limit value
            x = max(t - lower, 1e-300)
            return f(lower + x) / x ** singular_power
        head = _quad(regular, lower, head_end, spec, weight="alg",
                     wvar=(singular_power, 0.0))[0]
    else:
        head = _quad(f, lower, head_end, spec)[0]
    return head + rest(head_end)


def expand_bracket(g, lo, hi, *, factor=2.0, max_iter=200, log_space=False):
    """Grow ``[lo, hi]`` geometrically until ``g`` changes sign.

    With ``log_space`` the bracket is grown additively in the argument
    (the caller works with ``log x``).
    """
    glo, ghi = g(lo), g(hi)
    for _ in range(max_iter):
        if not (np.isfinite(glo) and np.isfinite(ghi)):
            raise RootError("non-finite function value while bracketing")
        if np.sign(glo) != np.sign(ghi) or glo == 0 or ghi == 0:
            return lo, hi
        # move the endpoint whose value is smaller in magnitude
        if abs(glo) < abs(ghi):
            lo = lo - factor * (hi - lo) if log_space else lo / factor
            glo = g(lo)
        else:
            hi = hi + factor * (hi - lo) if log_space else hi * factor
            ghi = g(hi)
    raise RootError(f"no sign change found after {max_iter} expansions")


def solve_monotone(g: Callable[[float], float], bracket: Sequence[float],
                   tol: float = DEFAULT_ROOT_TOL) -> float:
    """Root of a continuous, strictly monotone ``g`` inside ``bracket``.

    Brent's method (bisection safeguarded by inverse quadratic steps), so
    the iterate never leaves the bracket.  ``tol`` bounds the bracket width;
    the relative floor is four machine epsilons.
    """
    a, b = float(bracket[0]), float(bracket[1])

    def checked(x):
        y = g(x)
        if not np.isfinite(y):
            raise RootError(f"non-finite function value at x={x!r}")
        return y

    fa, fb = checked(a), checked(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise RootError(
            f"no sign change on [{a}, {b}]: g(a)={fa:.3e}, g(b)={fb:.3e}")
    return optimize.brentq(checked, a, b, xtol=tol, rtol=4 * np.finfo(float).eps,
                           maxiter=500)


# --------------------------------------------------------------------------
# truncated fractional power series


@dataclass(frozen=True)
class FractionalSeries:
    """Truncated series ``sum_j coeffs[j] * r**(j * step)``."""

    step: float
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coeffs must be a non-empty 1-d sequence")
        if not self.step > 0:
            raise ValueError(f"step must be positive, got {self.step!r}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def constant(cls, value, step, order):
        c = np.zeros(order + 1)
        c[0] = value
        return cls(step, c)

    @classmethod
    def monomial(cls, step, order, power=1, coeff=1.0):
        c = np.zeros(order + 1)
        if power <= order:
            c[power] = coeff
        return cls(step, c)

    @property
    def order(self):
        return self.coeffs.size - 1

    def __getitem__(self, j):
        return self.coeffs[j]

    def __repr__(self):
        return f"FractionalSeries(step={self.step!r}, coeffs={self.coeffs.tolist()!r})"

    def _check(self, other):
        if not isinstance(other, FractionalSeries):
            return FractionalSeries.constant(float(other), self.step, self.order)
        if not math.isclose(self.step, other.step, rel_tol=1e-14, abs_tol=0):
            raise ValueError(
                f"series steps differ: {self.step!r} vs {other.step!r}")
        if other.order != self.order:
            raise ValueError(
                f"series orders differ: {self.order} vs {other.order}")
        return other

    def __add__(self, other):
        other = self._check(other)
        return FractionalSeries(self.step, self.coeffs + other.coeffs)

    __radd__ = __add__

    def __neg__(self):
        return FractionalSeries(self.step, -self.coeffs)

    def __sub__(self, other):
        return self + (-self._check(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, FractionalSeries):
            return FractionalSeries(self.step, self.coeffs * float(other))
        return series_mul(self, other)

    __rmul__ = __mul__

    def __pow__(self, p):
        return series_pow(self, p)

    def shift(self, k):
        """Multiply by ``r**(k * step)`` and truncate."""
        c = np.zeros_like(self.coeffs)
        if k <= self.order:
            c[k:] = self.coeffs[: self.coeffs.size - k]
        return FractionalSeries(self.step, c)

    def __call__(self, r):
        s = np.asarray(r, dtype=float) ** self.step
        return np.polynomial.polynomial.polyval(s, self.coeffs)


def series_mul(a: FractionalSeries, b: FractionalSeries) -> FractionalSeries:
    """Cauchy product truncated at the common order."""
    b = a._check(b)
    m = a.order
    c = np.convolve(a.coeffs, b.coeffs)[: m + 1]
    return FractionalSeries(a.step, c)


def series_pow(a: FractionalSeries, p: float) -> FractionalSeries:
    """``a**p`` through order ``a.order``.

    Uses the recurrence obtained from ``a * b' = p * a' * b`` for
    ``b = a**p``, which needs ``a[0] != 0``; non-integer ``p`` additionally
    needs ``a[0] > 0``.
    """
    a0 = a.coeffs[0]
    p = float(p)
    integral = p.is_integer()
    if a0 == 0 or (not integral and a0 < 0):
        raise ValueError(
            f"series_pow needs a positive leading coefficient for p={p}, got {a0}")
    m = a.order
    ac = a.coeffs
    b = np.zeros(m + 1)
    b[0] = a0 ** p
    for n in range(1, m + 1):
        k = np.arange(1, n + 1)
        b[n] = np.dot((p * k - (n - k)), ac[k] * b[n - k]) / (n * a0)
    return FractionalSeries(a.step, b)


def warn_once(msg, category=RuntimeWarning):
    warnings.warn(msg, category, stacklevel=3)
