"""
Invariant suite behind ``mfbm validate``.

Each check returns a nonnegative discrepancy and passes when it does not
exceed its tolerance.  Numerical tolerances are multiplied by the caller's
scale (``--tight`` halves them); structural bounds, such as the factor-two
grid refinement or the 10% saddlepoint accuracy, are fixed properties and
are not scaled.
"""
from __future__ import annotations

import math
import time

import numpy as np
from scipy.special import erf

__all__ = ["CHECKS", "run_suite"]


def _series():
    from .numcore import FractionalSeries
    a = FractionalSeries(0.25, [2.0, -0.3, 0.7, 0.1, -0.05, 0.02])
    back = (a ** 0.5) ** 2
    inv = a * a ** -1.0
    one = np.zeros(a.order + 1)
    one[0] = 1.0
    return max(np.abs(back.coeffs - a.coeffs).max(), np.abs(inv.coeffs - one).max())


def _quadrature():
    from .numcore import QuadratureSpec, integrate_improper
    errs = []
    for p in (1.5, 2.5, 4.0):
        v = integrate_improper(lambda t: t ** -p, 1.0, QuadratureSpec(decay=p))
        errs.append(abs(v * (p - 1.0) - 1.0))
    # algebraic singularity at the origin: int_0^inf t^-1/2/(1+t) = pi
    v = integrate_improper(lambda t: t ** -0.5 / (1 + t), 0.0,
                           QuadratureSpec(decay=1.5), singular_power=-0.5)
    errs.append(abs(v / math.pi - 1.0))
    return max(errs)


def _gamma():
    from .numcore import log_gamma
    return max(abs(log_gamma(0.5) - 0.5 * math.log(math.pi)),
               abs(log_gamma(5.0) - math.log(24.0)))


def _nu_roundtrip():
    from .spectrum import lambda_mixed, lambda_to_nu
    errs = []
    for H in (0.3, 0.7):
        for n in (1, 7, 50, 1000):
            r = lambda_mixed(H, n)
            errs.append(abs(lambda_to_nu(H, r.lam) / r.nu - 1.0))
    return max(errs)


def _q_alpha():
    from .spectrum import q_alpha, q_alpha_arcsin, b_alpha_limit
    return max(abs(q_alpha(H) - q_alpha_arcsin(H, b_alpha_limit(H))) for H in (0.25, 0.3, 0.4))


def _beta1():
    from .smallball import beta_sequence
    return max(abs(beta_sequence(H).betas[1] / (2 ** (2 * H - 4) * math.gamma(2 * H + 1)) - 1)
               for H in (0.76, 0.8, 0.85, 0.9, 0.95))


def _beta0():
    from .smallball import beta0, beta_sequence
    return max(abs(beta_sequence(H).betas[0] / beta0(H) - 1) for H in (0.25, 0.3, 0.4))


def _y_residual():
    from .smallball import beta_sequence, strata_count, y_residual, y_series, weight_constants
    worst = 0.0
    for H in (0.55, 0.6, 0.7, 0.8, 0.9, 0.3, 0.35, 0.4, 0.45):
        L = strata_count(weight_constants(H).delta[1])
        worst = max(worst, np.abs(y_residual(H, y_series(H, L))).max())
    return worst


def _chi():
    from .smallball import chi_constants, chi_quadrature, weight_constants, _y_terms
    worst = 0.0
    for H in (0.3, 0.45, 0.7, 0.8):
        w = weight_constants(H)
        for k in range(0, _y_terms(w.delta[1]) + 2):
            try:
                a = chi_constants(k, w)
            except ValueError:
                break
            b = chi_quadrature(k, w)
            for x, y in zip(a, b):
                if not math.isnan(x):
                    worst = max(worst, abs(x / y - 1))
    return worst


def _gamma_rule():
    from .smallball import gamma_exponent, prefactor_exponent, weight_constants
    H = np.linspace(0.02, 0.48, 24)
    below = max(0.0, max(1.0 - gamma_exponent(x) for x in H))
    # the weight-derived prefactor reproduces gamma v 1 on both sides
    diff = max(abs(prefactor_exponent(weight_constants(x)) - max(gamma_exponent(x), 1.0))
               for x in (0.2, 0.3, 0.4, 0.6, 0.7, 0.9))
    return max(below, diff)


def _refinement():
    from .oracle import build_covariance, numeric_eigenvalues
    worst = 0.0
    for H in (0.3, 0.7):
        e = [numeric_eigenvalues(build_covariance(H, N), 20).values for N in (100, 200, 400)]
        worst = max(worst, (np.abs(e[2] - e[1]) / np.abs(e[1] - e[0])).max())
    return worst


def _weyl():
    from .oracle import build_covariance, numeric_eigenvalues
    worst = 0.0
    for H in (0.3, 0.7):
        lam = {k: numeric_eigenvalues(build_covariance(H, 400, k), 1)[1]
               for k in ("bm", "fbm", "mixed")}
        worst = max(worst, lam["mixed"] - lam["bm"] - lam["fbm"])
    return max(worst, 0.0)


def _positivity():
    from .oracle import build_covariance, operator_spectrum
    worst = 0.0
    for H in (0.3, 0.7):
        v = operator_spectrum(build_covariance(H, 400))
        worst = max(worst, float(np.sum(v <= 0)))
    return worst


def _determinism():
    from .oracle import EigenSequence
    from .sampler import MCConfig, chisq_smallball
    from .spectrum import lambda_bm
    eigs = EigenSequence(2 * lambda_bm(np.arange(1, 65)))
    cfg = MCConfig(5000, 12345, 64, "chisq", batch=777)
    a = chisq_smallball(eigs, 0.3, cfg)
    b = chisq_smallball(eigs, 0.3, MCConfig(5000, 12345, 64, "chisq", batch=5000))
    return float(abs(a.hits - b.hits))


def _backends():
    from . import _kernels_py, kernels
    a = np.empty((200, 33))
    b = np.empty((200, 33))
    kernels.fill_normals(99, 1000, a)
    _kernels_py.fill_normals(99, 1000, b)
    return float(np.abs(a - b).max())


def _scaling():
    from .smallball import saddlepoint_log_probability
    from .spectrum import mixed_eigenvalues
    lam = mixed_eigenvalues(0.7, np.arange(1, 400))
    return max(abs(saddlepoint_log_probability(c * r, c * lam)
                   - saddlepoint_log_probability(r, lam))
               for c, r in ((2.0, 0.05), (0.3, 0.2)))


def _single_chisq():
    from .smallball import saddlepoint_probability
    r = np.geomspace(0.01, 0.5, 9)
    return max(abs(saddlepoint_probability(x, [1.0]) / erf(math.sqrt(x / 2)) - 1) for x in r)


def _discrete_single():
    from .smallball import discrete_I
    return max(abs(discrete_I(u, [1.0])[0] + 0.5 * math.log1p(2 * u)) for u in (0.1, 1.0, 30.0))


# name -> (function, tolerance, scaled)
CHECKS = {
    "numcore.series_pow_roundtrip": (_series, 1e-12, True),
    "numcore.improper_quadrature": (_quadrature, 1e-9, True),
    "numcore.log_gamma": (_gamma, 1e-14, True),
    "spectrum.nu_roundtrip": (_nu_roundtrip, 1e-10, True),
    "spectrum.q_alpha_forms": (_q_alpha, 1e-12, True),
    "smallball.beta1_closed_form": (_beta1, 1e-10, True),
    "smallball.beta0_consistency": (_beta0, 1e-10, True),
    "smallball.y_series_residual": (_y_residual, 1e-12, True),
    "smallball.chi_cross_validation": (_chi, 1e-8, True),
    "smallball.gamma_rule": (_gamma_rule, 1e-12, True),
    "smallball.discrete_I_single": (_discrete_single, 1e-14, True),
    "smallball.scaling_identity": (_scaling, 1e-8, True),
    "smallball.single_chisq_accuracy": (_single_chisq, 0.10, False),
    "oracle.grid_refinement_ratio": (_refinement, 0.5, False),
    "oracle.weyl_inequality": (_weyl, 1e-12, True),
    "oracle.positivity_violations": (_positivity, 0.0, False),
    "sampler.seed_determinism": (_determinism, 0.0, False),
    "sampler.backend_agreement": (_backends, 1e-12, True),
}


def run_suite(scale=1.0, names=None):
    """Run the checks and return a JSON-ready report.

    Parameters
    ----------
    scale : float
        Multiplier for numerical tolerances.
    names : iterable of str, optional
        Subset of :data:`CHECKS`.
    """
    if not scale >= 0:
        raise ValueError(f"tolerance scale must be nonnegative, got {scale!r}")
    checks = []
    for name in (names or CHECKS):
        fn, tol, scaled = CHECKS[name]
        tol = tol * scale if scaled else tol
        t0 = time.perf_counter()
        try:
            value = float(fn())
            error = None
        except Exception as exc:  # a crashing check is a failed check
            value, error = math.inf, f"{type(exc).__name__}: {exc}"
        ok = bool(value <= tol)
        checks.append({"name": name, "value": value, "tolerance": tol, "passed": ok,
                       "seconds": time.perf_counter() - t0, "error": error})
    return {"passed": all(c["passed"] for c in checks), "scale": scale, "checks": checks}
