"""
L2 small-ball probabilities of mixed fBm.

Two independent routes are provided.

Numeric route
    ``P(sum_n lambda_n Z_n <= r)`` with ``Z_n ~ chi2_1`` i.i.d. is evaluated
    from the eigenvalues through the log-Laplace transform

    .. math::
        \\tilde I_0(u) = -\\tfrac12 \\sum_n \\log(1 + 2u\\lambda_n),\\quad
        \\tilde I_1(u) = u \\tilde I_0'(u), \\quad
        \\tilde I_2(u) = u^2 \\tilde I_0''(u),

    and the tilt ``u(r)`` solving ``I_1(u) + u r = 0``.  The default
    evaluator inverts the Laplace transform along a contour through the
    saddle point (Talbot-shaped for a positive tilt, parabolic for a
    negative one), which is exact up to quadrature error.
    Classical saddlepoint formulas are available for comparison.

Asymptotic route
    Eigenvalues are replaced by a three-term power law
    ``phi(t) = sum_j c_j t**-d_j``; the expansions of the I-integrals in
    ``u`` lead to a root equation for ``y(r)`` that is solved as a
    truncated fractional power series, and the stratified exponent

    .. math::
        \\log P(\\|\\tilde B\\|_2 \\le \\varepsilon) =
        (\\gamma(H) \\vee 1)\\log\\varepsilon
        - \\sum_{\\ell=0}^{L} \\beta_\\ell(H)\\,
          \\varepsilon^{(\\ell|2H-1|-1)/(1/2\\wedge H)} + O(1)

    follows by collecting powers of ``r = eps**2``.  The additive ``O(1)``
    (a multiplicative constant in the probability) is not computed.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .numcore import (FractionalSeries, QuadratureSpec, RootError, expand_bracket,
                      integrate_improper, log_gamma, series_pow, solve_monotone)
from .oracle import EigenSequence
from .spectrum import HurstParam, q_alpha

__all__ = [
    "PowerLawWeight",
    "SmallBallAsymptotics",
    "SaddlePoint",
    "weight_constants",
    "I0",
    "I1",
    "I2",
    "I_integrals",
    "discrete_I",
    "solve_saddle",
    "saddlepoint_log_probability",
    "saddlepoint_probability",
    "corollary_log_probability",
    "gamma_exponent",
    "prefactor_exponent",
    "beta0",
    "chi_constants",
    "chi_quadrature",
    "hg_coefficients",
    "strata_count",
    "y_series",
    "y_residual",
    "beta_sequence",
    "asymptotic_log_probability",
    "brownian_asymptotics",
    "mixed_tail_sequence",
]

log = logging.getLogger(__name__)

SNAP = 1e-12
METHODS = ("contour", "lugannani-rice", "dll", "corollary")


# --------------------------------------------------------------------------
# weight function


@dataclass(frozen=True)
class PowerLawWeight:
    """``phi(t) = sum_j c[j] * t**-d[j]`` with ``d`` strictly increasing."""

    c: tuple
    d: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        d = tuple(float(x) for x in self.d)
        if len(c) != len(d) or not c:
            raise ValueError("c and d must be non-empty and of equal length")
        if any(x <= 0 for x in c):
            raise ValueError("weight coefficients must be positive")
        if d[0] <= 1 or any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("exponents must satisfy 1 < d_1 < d_2 < ...")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)

    @property
    def a(self):
        return tuple(x / self.c[0] for x in self.c)

    @property
    def delta(self):
        return tuple(x - self.d[0] for x in self.d)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = sum(cj * t ** -dj for cj, dj in zip(self.c, self.d))
        return out if np.ndim(out) else float(out)


def weight_constants(h):
    """Three-term power law matching the mixed eigenvalues.

    ``H > 1/2``: ``c = (1/pi**2, kappa/pi**(3-alpha), 1/pi**2)``,
    ``d = (2, 3-alpha, 3)``.

    ``H < 1/2``: ``c = (kappa/pi**(3-alpha), 1/pi**2, c1 (3-alpha) q / 2)``,
    ``d = (3-alpha, 2, 4-alpha)``.

    In both cases ``d3 - d1 = 1``.
    """
    h = HurstParam.of(h)
    if h.H == 0.5:
        raise ValueError("H = 1/2 is excluded: the weight collapses to a single "
                         "power law (standard Brownian motion case)")
    a = h.alpha
    pi2 = 1.0 / math.pi ** 2
    cf = h.kappa / math.pi ** (3.0 - a)
    if h.H > 0.5:
        w = PowerLawWeight((pi2, cf, pi2), (2.0, 3.0 - a, 3.0))
    else:
        w = PowerLawWeight((cf, pi2, cf * (3.0 - a) * q_alpha(h) / 2.0),
                           (3.0 - a, 2.0, 4.0 - a))
    assert abs(w.delta[2] - 1.0) < 1e-14
    return w


# --------------------------------------------------------------------------
# integral forms of the I-functions


def _ispec(w, power, spec):
    if spec is not None:
        return spec
    return QuadratureSpec(abs_tol=0.0, rel_tol=1e-10, limit=500, decay=power * w.d[0])


def _knee(u, w):
    # where 2 u phi(t) drops through 1; the integrands change scale there
    t = (2.0 * u * w.c[0]) ** (1.0 / w.d[0])
    return (t,) if t > 2.0 else ()


def I0(u, w, spec=None):
    """``-(1/2) int_1^inf log(1 + 2 u phi(t)) dt``."""
    _check_u(u)
    return -0.5 * integrate_improper(lambda t: math.log1p(2.0 * u * w(t)), 1.0,
                                     _ispec(w, 1, spec), breakpoints=_knee(u, w))


def I1(u, w, spec=None):
    """``-int_1^inf u phi / (1 + 2 u phi) dt``."""
    _check_u(u)

    def f(t):
        x = u * w(t)
        return x / (1.0 + 2.0 * x)
    return -integrate_improper(f, 1.0, _ispec(w, 1, spec), breakpoints=_knee(u, w))


def I2(u, w, spec=None):
    """``2 int_1^inf (u phi / (1 + 2 u phi))**2 dt``."""
    _check_u(u)

    def f(t):
        x = u * w(t)
        return (x / (1.0 + 2.0 * x)) ** 2
    return 2.0 * integrate_improper(f, 1.0, _ispec(w, 2, spec), breakpoints=_knee(u, w))


def I_integrals(u, w, spec=None):
    return I0(u, w, spec), I1(u, w, spec), I2(u, w, spec)


def _check_u(u):
    if not u > 0 or not math.isfinite(u):
        raise ValueError(f"u must be positive and finite, got {u!r}")


# --------------------------------------------------------------------------
# discrete sums over eigenvalues


class _LaplaceSum:
    """Log-Laplace transform of ``sum lambda_n Z_n`` and its derivatives.

    Stored eigenvalues are summed exactly.  Past the last index the tail
    model enters through its moments ``M_k = int_{n0}^inf phi(x)**k dx``,
    ``n0 = len + 1/2`` (a midpoint rule for the remaining sum), via the
    series of ``log(1 + z)``.
    """

    KMAX = 60

    def __init__(self, eigs):
        if not isinstance(eigs, EigenSequence):
            eigs = EigenSequence(np.asarray(eigs, dtype=float))
        self.eigs = eigs
        self.lam = eigs.values
        self.lmax = float(self.lam[0])
        self._moments = None
        self.n0 = len(eigs) + 0.5
        self.phi0 = float(eigs.tail(self.n0)) if eigs.tail is not None else 0.0

    @property
    def has_tail(self):
        return self.eigs.tail is not None

    def moments(self):
        # m_k = int_1^inf (phi(n0 y) / phi0)**k dy, so M_k = n0 phi0**k m_k
        if self._moments is None:
            tail, n0, p0 = self.eigs.tail, self.n0, self.phi0
            d = self.eigs.tail_decay
            m = np.zeros(self.KMAX + 1)
            for k in range(1, self.KMAX + 1):
                spec = QuadratureSpec(rel_tol=1e-12, decay=k * d)
                m[k] = integrate_improper(
                    lambda y, k=k: (float(tail(n0 * y)) / p0) ** k, 1.0, spec)
            self._moments = m
        return self._moments

    def _tail_series(self, t, order):
        """Return ``(L_tail, t L', t**2 L'')`` for complex or real ``t``."""
        if not self.has_tail:
            return 0.0, 0.0, 0.0
        z = 2.0 * t * self.phi0
        if abs(z) >= 0.5:
            return self._tail_quad(t, order)
        m = self.moments()
        s0 = s1 = s2 = 0.0
        zk = 1.0
        for k in range(1, self.KMAX + 1):
            zk = zk * z
            term = (-1.0) ** (k + 1) * zk * m[k]
            s0 += term / k
            s1 += term
            s2 += (k - 1) * term
            if abs(term) < 1e-18 * max(abs(s1), 1e-300):
                break
        c = -0.5 * self.n0
        return c * s0, c * s1, c * s2

    def _tail_quad(self, t, order):
        # x = n0 e^v turns the algebraic tail into exponential decay in v
        tail, n0 = self.eigs.tail, self.n0
        d = self.eigs.tail_decay
        # split where |2 t phi| = 1, roughly at the knee of the integrand
        vk = max(math.log(max(2.0 * abs(t) * self.phi0, 1.0)) / d, 0.0)
        # past v_end the integrand is below exp(-700) of its knee value
        v_end = min(vk + 700.0 / (d - 1.0), 700.0 - math.log(n0))
        pieces = [(0.0, vk), (vk, v_end)] if vk > 0 else [(0.0, v_end)]

        def part(fn):
            out = 0.0
            for lo, hi in pieces:
                for comp in ("real", "imag") if isinstance(t, complex) else ("real",):
                    def q(v, comp=comp):
                        x = n0 * math.exp(v)
                        return getattr(complex(fn(x)), comp) * x
                    val, err = integrate.quad(q, lo, hi, limit=500, epsabs=1e-12,
                                              epsrel=1e-11, full_output=1)[:2]
                    if err > 1e-8 * max(abs(val), 1.0):
                        log.debug("tail quadrature on [%g, %g]: error estimate %.2e",
                                  lo, hi, err)
                    out = out + (1j * val if comp == "imag" else val)
            return out
        z = lambda x: 2.0 * t * float(tail(x))
        L0 = -0.5 * part(lambda x: np.log(1.0 + z(x)))
        if order == 0:
            return L0, 0.0, 0.0
        L1 = -0.5 * part(lambda x: z(x) / (1.0 + z(x)))
        L2 = 0.5 * part(lambda x: (z(x) / (1.0 + z(x))) ** 2)
        return L0, L1, L2

    def I(self, u, order=2):
        """``(I0, I1, I2)`` at real ``u > -1/(2 lambda_1)``."""
        if not u > -0.5 / self.lmax:
            raise ValueError("u is outside the domain of the Laplace transform")
        x = u * self.lam
        q = x / (1.0 + 2.0 * x)
        i0 = -0.5 * float(np.sum(np.log1p(2.0 * x)))
        i1 = -float(np.sum(q))
        i2 = 2.0 * float(np.sum(q * q))
        t0, t1, t2 = self._tail_series(u, order)
        return i0 + t0, i1 + t1, i2 + t2

    def mean(self):
        m = float(np.sum(self.lam))
        if self.has_tail:
            m += self.n0 * self.phi0 * float(self.moments()[1])
        return m

    def log_laplace(self, t, tail=True):
        """``log E exp(-t X)`` for complex ``t`` off the cut."""
        val = -0.5 * np.sum(np.log1p(2.0 * t * self.lam))
        if tail and self.has_tail:
            val = val + self._tail_series(t, 0)[0]
        return val

    def log_laplace_tail(self, t):
        return self._tail_series(t, 0)[0]

    def extended(self, u, target=0.02, cap=400_000):
        """Copy with more stored terms so that ``2 u phi(n0) <= target``.

        Keeps the tail series well inside its radius of convergence near the
        saddle point.  Extra terms come from the tail model at integer
        indices.
        """
        if not self.has_tail or 2.0 * abs(u) * self.phi0 <= target:
            return self
        n = len(self.lam)
        m = n
        while 2.0 * abs(u) * float(self.eigs.tail(m + 0.5)) > target and m < cap:
            m = min(2 * m, cap)
        if m == n:
            return self
        extra = np.asarray(self.eigs.tail(np.arange(n + 1, m + 1)), dtype=float)
        vals = np.concatenate([self.lam, np.minimum(extra, self.lam[-1])])
        log.debug("extending eigenvalue sum from %d to %d terms", n, m)
        return _LaplaceSum(EigenSequence(vals, self.eigs.tail, self.eigs.tail_decay,
                                         self.eigs.label))

    def second_derivative(self, u):
        """``d^2/du^2 log E exp(-u X)``, finite at ``u = 0``."""
        x = self.lam / (1.0 + 2.0 * u * self.lam)
        v = 2.0 * float(np.sum(x * x))
        if self.has_tail:
            if u != 0:
                v += self._tail_series(u, 2)[2] / u ** 2
            else:
                v += 2.0 * self.n0 * self.phi0 ** 2 * float(self.moments()[2])
        return v


def discrete_I(u, eigs):
    """``(I0, I1, I2)`` as sums over an eigenvalue sequence.

    Parameters
    ----------
    u : float
        Tilt; any ``u > -1/(2 lambda_1)`` is admitted.
    eigs : EigenSequence or array_like
        If a tail model is attached, eigenvalues past the last stored index
        are accounted for analytically.

    Returns
    -------
    tuple of float
    """
    S = _LaplaceSum(eigs)
    out = S.I(u)
    if S.has_tail:
        log.debug("discrete_I: tail contribution to I0 at u=%g: %.3e",
                  u, S._tail_series(u, 0)[0])
    return out


@dataclass(frozen=True)
class SaddlePoint:
    """Tilt ``u`` solving ``I1(u) + u r = 0`` with the I-values there."""

    r: float
    u: float
    I0: float
    I1: float
    I2: float
    mean: float

    @property
    def exponent(self):
        """``I0(u) + u r``, the log of the exponential tilting factor."""
        return self.I0 + self.u * self.r


def solve_saddle(r, eigs, _sum=None):
    """Solve ``I1(u) + u r = 0`` for the tilt ``u(r)``.

    ``I1(u) / u = -sum lambda / (1 + 2 u lambda)`` is increasing in ``u``,
    so the root is unique.  It is positive for ``r`` below the mean and
    negative above it; the search runs in ``log u`` or in ``log`` of the
    distance to the pole ``-1/(2 lambda_1)`` respectively.
    """
    if not r > 0 or not math.isfinite(r):
        raise ValueError(f"r must be positive and finite, got {r!r}")
    S = _sum or _LaplaceSum(eigs)
    mean = S.mean()

    def slope(u):
        # I1(u)/u + r, with the u = 0 limit equal to r - mean
        if u == 0:
            return r - mean
        return S.I(u, order=1)[1] / u + r

    if r < mean:
        g = lambda s: slope(math.exp(s))
        s0 = math.log(max(1.0 / r, 1e-300))
        try:
            lo, hi = expand_bracket(g, s0 - 2.0, s0 + 2.0, log_space=True)
            u = math.exp(solve_monotone(g, (lo, hi), tol=1e-14))
        except RootError as exc:
            raise RootError(f"could not bracket the saddle point for r={r}: {exc}") from exc
    elif r > mean:
        pole = -0.5 / S.lmax
        # u = pole * (1 - exp(-s)), s > 0 moves from 0 towards the pole
        g = lambda s: slope(pole * -math.expm1(-s))
        try:
            lo, hi = expand_bracket(g, 1e-3, 1.0, log_space=True)
            lo = max(lo, 1e-300)
            u = pole * -math.expm1(-solve_monotone(g, (lo, hi), tol=1e-14))
        except RootError as exc:
            raise RootError(f"could not bracket the saddle point for r={r}: {exc}") from exc
    else:
        u = 0.0
    i0, i1, i2 = S.I(u)
    return SaddlePoint(float(r), u, i0, i1, i2, mean)


def _contour_log_probability(r, S, sp, a=0.5):
    """Exact inversion of the Laplace transform along a deformed contour.

    ``P(X <= r) = (1/pi) int Im[L(t) e^{t r} t' / t]`` over the upper half
    of any contour crossing the real axis once, right of the pole at 0.
    For a crossing point ``c > 0`` the Talbot-type curve
    ``t = c theta cot(theta) + i s theta``, ``theta in (0, pi)``, keeps
    ``|t|`` large, where ``|L|`` is small; ``s = max(c, sigma)`` with
    ``sigma = 1/sqrt(L''(c))`` the Gaussian width at the saddle.  Above the
    mean the saddle is negative and the parabola
    ``t = c + sigma (i x - a x**2)`` is used, adding the residue 1 at 0.
    """
    sig = 1.0 / math.sqrt(S.second_derivative(sp.u))
    c = sp.u
    if abs(c) < 0.1 * sig:
        # saddle too close to the pole; move the crossing point right
        c = 0.5 * sig
    base = float(S.log_laplace(c)) + c * r

    def integrand(t, dt):
        head = S.log_laplace(t, tail=False) + t * r - base
        if head.real < -800.0:
            # far below the value at the saddle; the tail only shrinks |L|
            return 0.0
        if S.has_tail:
            head = head + S.log_laplace_tail(t)
        return (np.exp(head) * dt / t).imag

    if c > 0:
        sc = max(c, sig)

        def f(th):
            if th <= 0.0:
                return 0.0
            sn, cs = math.sin(th), math.cos(th)
            t = complex(c * th * cs / sn, sc * th)
            dt = complex(c * (cs / sn - th / (sn * sn)), sc)
            return integrand(t, dt)
        w = sig / sc
        pts = sorted({min(k * w, 0.999 * math.pi) for k in (1.0, 2.0, 4.0, 8.0, 16.0)})
        v = integrate.quad(f, 0.0, math.pi, points=pts, limit=2000,
                           epsabs=0.0, epsrel=1e-11)[0] / math.pi
        if not v > 0:
            raise ArithmeticError(f"contour integral lost positivity (r={r}, value {v})")
        return base + math.log(v)

    def g(x):
        t = complex(c - sig * a * x * x, sig * x)
        dt = complex(-2.0 * a * sig * x, sig)
        return integrand(t, dt)
    # past x_max the factor exp(Re(t) r) alone is below exp(-750)
    x_max = math.sqrt(max(750.0 + abs(c) * r, 1.0) / (a * sig * r)) + 1.0
    v = integrate.quad(g, 0.0, x_max, limit=2000, epsabs=0.0, epsrel=1e-11)[0] / math.pi
    # contour left of the pole: P = 1 + e^{base} v with v < 0
    p = 1.0 + math.exp(base) * v
    if not 0 < p <= 1 + 1e-9:
        raise ArithmeticError(f"contour inversion out of range (r={r}, value {p})")
    return math.log(min(p, 1.0))


def _lugannani_rice(sp, S):
    ex = sp.exponent
    if abs(sp.u) < 1e-10:
        # limit at the mean from the third cumulant
        k2 = 2.0 * float(np.sum(S.lam ** 2))
        k3 = 8.0 * float(np.sum(S.lam ** 3))
        return math.log(0.5 + k3 / (6.0 * math.sqrt(2 * math.pi) * k2 ** 1.5))
    sgn = 1.0 if sp.u > 0 else -1.0
    w = -sgn * math.sqrt(max(-2.0 * ex, 0.0))
    v = -sgn * math.sqrt(sp.I2)
    dens = math.exp(-0.5 * w * w) / math.sqrt(2 * math.pi)
    p = ndtr(w) + dens * (1.0 / w - 1.0 / v)
    if not p > 0:
        raise ArithmeticError("Lugannani-Rice value is not positive")
    return math.log(p)


def saddlepoint_log_probability(r, eigs, method="contour"):
    """``log P(sum lambda_n Z_n <= r)`` from the eigenvalues.

    Parameters
    ----------
    r : float
        Radius squared, ``r > 0``.
    eigs : EigenSequence or array_like
    method : {'contour', 'lugannani-rice', 'dll', 'corollary'}
        ``contour`` is exact up to quadrature error and is the default.
        ``dll`` is ``exp(I0 + u r) / sqrt(2 pi I2)``; ``corollary`` is
        ``(sqrt(u) I2)**-1/2 exp(I0 + u r)``.  Both are asymptotic as
        ``r -> 0`` and only defined below the mean.

    Returns
    -------
    float
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    S = _LaplaceSum(eigs)
    sp = solve_saddle(r, None, _sum=S)
    S2 = S.extended(sp.u)
    if S2 is not S:
        S = S2
        sp = solve_saddle(r, None, _sum=S)
    if method == "contour":
        return _contour_log_probability(r, S, sp)
    if method == "lugannani-rice":
        return _lugannani_rice(sp, S)
    if sp.u <= 0:
        raise ValueError(f"method {method!r} requires r below the mean "
                         f"({sp.mean:.6g}), got r={r}")
    if method == "dll":
        return sp.exponent - 0.5 * math.log(2 * math.pi * sp.I2)
    return sp.exponent - 0.5 * math.log(math.sqrt(sp.u) * sp.I2)


def saddlepoint_probability(r, eigs, method="contour"):
    """``P(sum lambda_n Z_n <= r)``; clamped to 1 with a warning."""
    lp = saddlepoint_log_probability(r, eigs, method)
    if lp > 0:
        warnings.warn(f"saddlepoint value exp({lp:.3g}) exceeds 1; clamped",
                      RuntimeWarning, stacklevel=2)
        return 1.0
    return math.exp(lp)


def corollary_log_probability(r, w, spec=None):
    """Asymptotic formula with the integral I-functions of a weight.

    ``u(r)`` solves ``I1(u) + u r = 0`` with ``I1`` integrated over
    ``[1, inf)``; returns ``I0 + u r - log(sqrt(u) I2) / 2``.  Meaningful
    only as ``r -> 0`` and up to a multiplicative constant.
    """
    if not r > 0:
        raise ValueError("r must be positive")
    g = lambda s: I1(math.exp(s), w, spec) / math.exp(s) + r
    s0 = math.log(1.0 / r)
    lo, hi = expand_bracket(g, s0 - 2.0, s0 + 2.0, log_space=True)
    u = math.exp(solve_monotone(g, (lo, hi), tol=1e-13))
    i0, _, i2 = I_integrals(u, w, spec)
    return i0 + u * r - 0.5 * math.log(math.sqrt(u) * i2)


def mixed_tail_sequence(h, numeric=None, n_star=10_000):
    """Eigenvalue sequence for saddlepoint work on the mixed process.

    Numeric eigenvalues (if given) fill the leading indices, the closed
    form continues up to ``n_star`` and the closed form as a function of a
    continuous index is attached as the analytic tail.
    """
    from .spectrum import mixed_eigenvalues
    h = HurstParam.of(h)
    k = 0 if numeric is None else len(numeric)
    vals = mixed_eigenvalues(h, np.arange(k + 1, n_star + 1))
    if numeric is not None:
        head = np.asarray(getattr(numeric, "values", numeric), dtype=float)
        vals = np.concatenate([head, vals])
        # enforce ordering across the seam
        vals = np.minimum.accumulate(vals)
    decay = 1.0 + 2.0 * min(h.H, 0.5)
    return EigenSequence(vals, tail=lambda t: mixed_eigenvalues(h, t),
                         tail_decay=decay, label=f"mixed:H={h.H}:n*={n_star}")


# --------------------------------------------------------------------------
# exponents


def gamma_exponent(h):
    """``(5/4 - H + H**2) / (2H)``."""
    H = HurstParam.of(h).H
    return (1.25 - H + H * H) / (2.0 * H)


def beta0(h):
    """Leading small-ball coefficient.

    For ``H <= 1/2`` this is the fBm constant
    ``H * (sin(pi H) Gamma(2H+1) / ((2H+1) sin(pi/(2H+1)))**(2H+1))**(1/(2H))``;
    for ``H > 1/2`` the Brownian part dominates and the value is ``1/8``.
    """
    h = HurstParam.of(h)
    H = h.H
    if H > 0.5:
        return 0.125
    inner = h.kappa / ((2 * H + 1) * math.sin(math.pi / (2 * H + 1))) ** (2 * H + 1)
    return H * inner ** (1.0 / (2 * H))


def prefactor_exponent(w):
    """Power of ``eps`` in front of the exponential, derived from a weight.

    The log term of ``I0`` is ``A log u`` with
    ``A = (1 + a3 - a3 d3 / d1) / 2``; together with
    ``-(1/2) log(sqrt(u) I2)`` and ``u ~ r**(-d1/(d1-1))`` this gives the
    ``eps`` exponent.
    """
    d1, d3 = w.d[0], w.d[2]
    a3 = w.a[2]
    A = 0.5 * (1.0 + a3 - a3 * d3 / d1)
    p_r = -d1 / (d1 - 1.0) * (-0.25 - 0.5 / d1 + A)
    return 2.0 * p_r


# --------------------------------------------------------------------------
# chi, h, g constants


def _snap(x):
    k = round(x)
    return float(k) if abs(x - k) < SNAP else x


def strata_count(delta):
    """Largest ``m`` with ``m * delta < 1``.

    At exact integers ``1/delta`` the boundary term has a zero exponent and
    is dropped, so the boundary belongs to the stratum with fewer terms.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    x = _snap(1.0 / delta)
    return int(math.ceil(x) - 1)


def _y_terms(delta):
    # largest k with 2 k delta < 1
    return strata_count(2.0 * delta)


def chi_constants(k, w):
    """``(chi_{0,k}, chi_{1,k}, chi_{3,1})`` in closed Gamma form.

    ``chi_{1,k} = int_0^inf tau**(-k d2) / (tau**d1 + 1)**(k+1) dtau``,
    ``chi_{0,k}`` has power ``k`` in the denominator (``k >= 1``; ``nan``
    at ``k = 0``) and ``chi_{3,1} = int (tau**d1 + 1)**-2``.
    """
    d1, d2 = w.d[0], w.delta[1]
    b = (1.0 - k * d2) / d1
    if not b > 0:
        raise ValueError(f"chi constants need k * delta2 < 1 (k={k}, delta2={d2})")
    chi1 = math.exp(log_gamma(b) + log_gamma(k + 1 - b) - log_gamma(k + 1)) / d1
    chi0 = (math.exp(log_gamma(b) + log_gamma(k - b) - log_gamma(k)) / d1
            if k >= 1 else math.nan)
    chi31 = math.exp(log_gamma(1 / d1) + log_gamma(2 - 1 / d1)) / d1
    return chi0, chi1, chi31


def chi_quadrature(k, w, spec=None):
    """Direct quadrature of the three chi integrals (cross-check)."""
    d1, d2 = w.d[0], w.delta[1]
    p = -k * d2

    def q(power, den):
        sp = spec or QuadratureSpec(rel_tol=1e-12, decay=-power + d1 * den)
        return integrate_improper(lambda t: t ** power / (t ** d1 + 1.0) ** den, 0.0,
                                  sp, singular_power=power if power < 0 else None)
    chi1 = q(p, k + 1)
    chi0 = q(p, k) if k >= 1 else math.nan
    chi31 = q(0.0, 2)
    return chi0, chi1, chi31


def hg_coefficients(k, w):
    """``(h_k, g_k)`` multiplying ``u**((1 - k delta2)/d1)`` in ``-I1`` and ``I0``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    c1, c2 = w.c[0], w.c[1]
    d1, d2 = w.d[0], w.d[1]
    delta2 = d2 - d1
    chi0, chi1, _ = chi_constants(k, w)
    common = 0.5 * (-c2 / c1) ** k * (2.0 * c1) ** ((1.0 - k * delta2) / d1)
    return common * (chi1 - chi0), common * (d2 * chi0 - d1 * chi1)


# --------------------------------------------------------------------------
# fractional series for y(r) and the betas


def _y0(w):
    _, chi10, _ = chi_constants(0, w)
    return 1.0 / (0.5 * chi10 * (2.0 * w.c[0]) ** (1.0 / w.d[0]))


def _series_setup(h):
    h = HurstParam.of(h)
    w = weight_constants(h)
    d1, delta2 = w.d[0], w.delta[1]
    step = delta2 / (d1 - 1.0)
    return h, w, d1, delta2, step


def y_series(h, order):
    """Series ``y(r) = sum_j y_j r**(j step)`` of the scaled tilt.

    ``y`` is defined by ``u = (r y)**(-d1/(d1-1))`` and solves

    ``y / y0 + sum_{k=1}^{K} h_k r**(k step) y**(1 + k step) = 1``,

    ``step = delta2 / (d1 - 1)`` (``2H - 1`` for ``H > 1/2``,
    ``(1 - 2H) / (2H)`` for ``H < 1/2``), ``K`` the largest ``k`` with
    ``2 k delta2 < 1``.  Coefficients are found by fixed-point iteration on
    truncated series; each pass fixes one more coefficient.
    """
    h, w, d1, delta2, step = _series_setup(h)
    if order < 0:
        raise ValueError("order must be nonnegative")
    if order > 40:
        warnings.warn(f"series order {order} exceeds any meaningful number of strata",
                      RuntimeWarning, stacklevel=2)
    y0 = _y0(w)
    K = _y_terms(delta2)
    hk = [hg_coefficients(k, w)[0] for k in range(1, K + 1)]
    y = FractionalSeries.constant(y0, step, order)
    for _ in range(order + 1):
        acc = FractionalSeries.constant(1.0, step, order)
        for k, hv in enumerate(hk, start=1):
            acc = acc - hv * series_pow(y, 1.0 + k * step).shift(k)
        y = y0 * acc
    return y


def y_residual(h, y):
    """Coefficients of ``y/y0 + sum h_k s**k y**(1+k step) - 1``."""
    h, w, d1, delta2, step = _series_setup(h)
    y0 = _y0(w)
    res = y * (1.0 / y0) - 1.0
    for k in range(1, _y_terms(delta2) + 1):
        res = res + hg_coefficients(k, w)[0] * series_pow(y, 1.0 + k * step).shift(k)
    return res.coeffs


@dataclass
class SmallBallAsymptotics:
    """Stratified small-ball exponent for one Hurst index.

    ``log P(||B|| <= eps) = gamma_exponent * log(eps)
    - sum_l betas[l] * eps**exponents[l] + O(1)``.
    """

    H: float
    gamma_exponent: float
    strata: int
    betas: np.ndarray
    exponents: np.ndarray
    regime: str
    y_coeffs: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "H": self.H,
            "regime": self.regime,
            "gamma": self.gamma_exponent,
            "strata": self.strata,
            "betas": [float(b) for b in self.betas],
            "exponents": [float(e) for e in self.exponents],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(float(d["H"]), float(d["gamma"]), int(d["strata"]),
                   np.asarray(d["betas"], dtype=float),
                   np.asarray(d["exponents"], dtype=float), str(d["regime"]))

    def log_probability(self, eps):
        eps = np.asarray(eps, dtype=float)
        out = self.gamma_exponent * np.log(eps)
        for b, e in zip(self.betas, self.exponents):
            out = out - b * eps ** e
        return out if np.ndim(out) else float(out)


def beta_sequence(h, L=None):
    """Coefficients ``beta_0 .. beta_L`` of the stratified exponent.

    With ``xi = y**(-d1/(d1-1))`` and ``eta_k = y**((k delta2 - 1)/(d1-1))``
    expanded in powers of ``r**step``,

    ``beta_l = (d1/y0) eta_{0,l} - sum_{j<l} g_{l-j} eta_{l-j,j} - xi_l``.

    Stratum ``l`` multiplies ``eps**(2 (l delta2 - 1)/(d1 - 1))``, which is
    ``eps**(2l(2H-1) - 2)`` for ``H > 1/2`` and
    ``eps**((l(1-2H) - 1)/H)`` for ``H < 1/2``.

    Parameters
    ----------
    h : HurstParam or float
        ``H != 1/2``.
    L : int, optional
        Highest stratum; defaults to the largest ``l`` with ``l |2H-1| < 1``.
    """
    h, w, d1, delta2, step = _series_setup(h)
    Lmax = strata_count(delta2)
    L = Lmax if L is None else int(L)
    if L < 0:
        raise ValueError("L must be nonnegative")
    y = y_series(h, L)
    y0 = y[0]
    xi = series_pow(y, -d1 / (d1 - 1.0))
    eta = [series_pow(y, (k * delta2 - 1.0) / (d1 - 1.0)) for k in range(L + 1)]
    g = [math.nan] + [hg_coefficients(k, w)[1] for k in range(1, L + 1)]
    betas = np.empty(L + 1)
    for ell in range(L + 1):
        b = d1 / y0 * eta[0][ell] - xi[ell]
        for j in range(ell):
            b -= g[ell - j] * eta[ell - j][j]
        betas[ell] = b
    if h.H > 0.5:
        # the leading term is the Brownian one; pin it to its exact value
        if abs(betas[0] - 0.125) > 1e-12:
            raise ArithmeticError(f"series leading coefficient {betas[0]!r} != 1/8")
        betas[0] = 0.125
    exps = np.array([2.0 * (ell * delta2 - 1.0) / (d1 - 1.0) for ell in range(L + 1)])
    gam = max(gamma_exponent(h), 1.0)
    return SmallBallAsymptotics(h.H, gam, L, betas, exps, h.regime.value, y.coeffs)


def brownian_asymptotics(variance=1.0):
    """Classical exponent for ``sqrt(variance) * B``.

    ``log P(||B||_2 <= eps) = log eps - 1/(8 eps**2) + O(1)``; scaling the
    process by ``sqrt(v)`` multiplies the exponent by ``v``.  The mixed
    process at ``H = 1/2`` is ``sqrt(2) B`` in law.
    """
    if not variance > 0:
        raise ValueError("variance must be positive")
    return SmallBallAsymptotics(0.5, 1.0, 0, np.array([variance / 8.0]),
                                np.array([-2.0]), "half")


def asymptotic_log_probability(h, eps, asym=None):
    """``(gamma v 1) log eps - sum_l beta_l eps**e_l``.

    The unknown additive constant (the multiplicative constant of the
    probability) is not included.
    """
    if asym is None:
        h = HurstParam.of(h)
        asym = brownian_asymptotics(2.0) if h.H == 0.5 else beta_sequence(h)
    if np.any(np.asarray(eps) <= 0):
        raise ValueError("eps must be positive")
    return asym.log_probability(eps)
