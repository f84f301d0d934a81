import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfbm.spectrum import (HurstParam, Regime, arg_x, b_alpha_limit, b_alpha_nu,
                           frequency_shift, lambda_bm, lambda_fbm, lambda_mixed,
                           lambda_to_nu, mixed_eigenvalues, mixed_expansion_coeffs,
                           nu_fbm, nu_mixed, q_alpha, q_alpha_arcsin, theta)

PI = math.pi


class TestHurstParam:
    @pytest.mark.parametrize("H", [0.0, 1.0, -0.2, 1.5, float("nan")])
    def test_domain(self, H):
        with pytest.raises(ValueError):
            HurstParam(H)

    def test_derived(self):
        h = HurstParam(0.75)
        assert h.alpha == pytest.approx(0.5)
        assert h.regime is Regime.SUPERHALF
        assert HurstParam(0.5).regime is Regime.HALF
        assert HurstParam(0.2).regime is Regime.SUBHALF
        assert h.kappa == pytest.approx(math.gamma(2.5) * math.sin(0.75 * PI))
        assert HurstParam.of(h) is h


class TestFrequencies:
    def test_fbm_frequency_examples(self):
        assert nu_fbm(0.5, 1) == pytest.approx(PI / 2)
        assert nu_fbm(0.25, 1) == pytest.approx(11 * PI / 24)
        assert nu_fbm(0.75, 3) == pytest.approx(5 * PI / 2 - PI / 40)

    def test_mixed_frequency_examples(self):
        assert nu_mixed(0.7, 2) == pytest.approx(3 * PI / 2)
        assert nu_mixed(0.3, 1) == pytest.approx(0.475 * PI)
        assert nu_mixed(0.5, 5) == pytest.approx(4.5 * PI)

    def test_vectorized_and_increasing(self):
        nu = nu_fbm(0.3, np.arange(1, 100))
        assert np.all(np.diff(nu) > 0) and np.all(nu > 0)

    def test_rejects_bad_index(self):
        with pytest.raises(ValueError):
            nu_fbm(0.3, 0)
        with pytest.raises(ValueError):
            lambda_mixed(0.3, 1.5)


class TestEigenvalues:
    def test_bm(self):
        assert lambda_bm(1) == pytest.approx(4 / PI ** 2)
        assert lambda_bm(2) == pytest.approx(4 / (9 * PI ** 2))
        assert lambda_bm(10) == pytest.approx(1 / (9.5 ** 2 * PI ** 2))

    def test_fbm_reduces_to_bm(self):
        n = np.arange(1, 30)
        assert np.allclose(lambda_fbm(0.5, n), 1 / ((n - 0.5) * PI) ** 2, rtol=1e-14)

    def test_fbm_direct(self):
        nu = nu_fbm(0.75, 10)
        assert lambda_fbm(0.75, 10) == pytest.approx(
            math.sin(0.75 * PI) * math.gamma(2.5) / nu ** 2.5, rel=1e-14)

    def test_mixed_examples(self):
        assert lambda_mixed(0.5, 1).lam == pytest.approx(8 / PI ** 2)
        expect = (PI / 2) ** -2 + math.sin(0.7 * PI) * math.gamma(2.4) * (PI / 2) ** -2.4
        r = lambda_mixed(0.7, 1)
        assert r.lam == pytest.approx(expect, rel=1e-14) and r.n == 1 and r.lambda_ == r.lam

    @pytest.mark.parametrize("H", [0.1, 0.3, 0.5, 0.7, 0.9])
    def test_monotone_and_above_bm(self, H):
        n = np.arange(1, 10_001)
        lam = mixed_eigenvalues(H, n)
        assert np.all(np.diff(lam) < 0)
        assert np.all(lam > lambda_bm(n))

    def test_half_is_doubled_bm(self):
        n = np.arange(1, 500)
        assert np.allclose(mixed_eigenvalues(0.5, n), 2 * lambda_bm(n), rtol=1e-15)

    def test_vector_matches_scalar(self):
        for n in (1, 7, 300):
            assert mixed_eigenvalues(0.35, [n])[0] == pytest.approx(lambda_mixed(0.35, n).lam, rel=1e-15)


class TestInversion:
    def test_examples(self):
        assert lambda_to_nu(0.5, 8 / PI ** 2) == pytest.approx(PI / 2, rel=1e-12)
        r = lambda_mixed(0.7, 3)
        assert lambda_to_nu(0.7, r.lam) == pytest.approx(r.nu, rel=1e-12)

    @pytest.mark.parametrize("H", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])
    def test_roundtrip(self, H):
        for n in range(1, 101):
            r = lambda_mixed(H, n)
            assert abs(lambda_to_nu(H, r.lam) - r.nu) < 1e-10 * max(r.nu, 1)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0.05, 0.95), st.floats(-20, 20))
    def test_monotone(self, H, loglam):
        lam = math.exp(loglam)
        assert lambda_to_nu(H, lam) > lambda_to_nu(H, 2 * lam)

    def test_errors(self):
        for bad in (0.0, -1.0, float("inf")):
            with pytest.raises(ValueError):
                lambda_to_nu(0.3, bad)


class TestExpansion:
    def test_coefficients(self):
        a1, a2, a3, a4 = mixed_expansion_coeffs(0.75)
        assert a1 == a3 == pytest.approx(1 / PI ** 2)
        assert a2 == pytest.approx(math.gamma(2.5) * math.sin(0.75 * PI) / PI ** 2.5)
        assert a4 == pytest.approx(a2 * 2.5 / 2)

    def test_rejects_rough(self):
        with pytest.raises(ValueError):
            mixed_expansion_coeffs(0.4)

    def test_residual_order(self):
        H = 0.75
        n = np.arange(10, 201).astype(float)
        a1, a2, a3, a4 = mixed_expansion_coeffs(H)
        model = a1 * n ** -2 + a2 * n ** (-2 * H - 1) + a3 * n ** -3 + a4 * n ** (-2 * H - 2)
        res = np.abs(mixed_eigenvalues(H, n.astype(int)) - model)
        slope = np.polyfit(np.log(n), np.log(res), 1)[0]
        assert slope <= -(2 * H + 2) + 0.2


class TestPhase:
    def test_half_vanishes(self):
        assert np.all(theta(np.linspace(0.1, 50, 20), 10.0, 0.5) == 0.0)

    def test_limit_and_sign(self):
        for H in (0.25, 0.75):
            t = np.geomspace(1e-3, 1e8, 50)
            th = theta(t, 100.0, H)
            assert abs(th[-1]) < 1e-8
            a = 2 - 2 * H
            assert np.all(np.sign(th) == np.sign(math.sin((1 - a) * PI / 2)))

    def test_direct_substitution(self):
        # alpha = 1/2, nu = 100, t = nu: s = 1
        h = HurstParam(0.75)
        S, C = math.sin(PI / 4), math.cos(PI / 4)
        den = 100 ** 0.5 / h.kappa * 2 + 1 + C
        assert theta(100.0, 100.0, h) == pytest.approx(math.atan(S / den), rel=1e-14)

    def test_b_alpha_nu_against_mpmath(self):
        h = HurstParam(0.3)
        a = h.alpha
        S, C = mpmath.sin((1 - a) * mpmath.pi / 2), mpmath.cos((1 - a) * mpmath.pi / 2)
        nu = 50.0
        f = lambda s: mpmath.atan2(S, nu ** (1 - a) / h.kappa * (s ** (3 - a) + s ** (1 - a))
                                   + s ** (3 - a) + C)
        ref = float(mpmath.quad(f, [0, 1, 10, mpmath.inf]) / mpmath.pi)
        assert b_alpha_nu(nu, h) == pytest.approx(ref, rel=1e-8)

    def test_b_alpha_half(self):
        assert b_alpha_nu(10.0, 0.5) == 0.0
        assert b_alpha_limit(0.5) == 0.0

    def test_b_alpha_limit_formula(self):
        # alpha = 3/2: pi/(3-alpha) = 2 pi / 3, (1-alpha)/2 = -1/4
        assert b_alpha_limit(0.25) == pytest.approx(math.sin(-PI / 6) / math.sin(2 * PI / 3))
        with pytest.raises(ValueError):
            b_alpha_limit(0.7)

    def test_b_alpha_converges(self):
        nu = 1e4
        assert abs(b_alpha_nu(nu, 0.25) - b_alpha_limit(0.25)) < 10 * nu ** (1 - 1.5)

    @pytest.mark.parametrize("H,smooth", [(0.25, False), (0.75, True)])
    def test_rates_bounded(self, H, smooth):
        a = 2 - 2 * H
        nus = 10.0 * 2.0 ** np.arange(11)
        if smooth:
            scaled = [b_alpha_nu(v, H) * v ** (1 - a) for v in nus]
        else:
            lim = b_alpha_limit(H)
            scaled = [abs(b_alpha_nu(v, H) - lim) * v ** (a - 1) for v in nus]
        scaled = np.abs(scaled)
        assert scaled.max() <= 2 * np.median(scaled)

    def test_frequency_shift_limit(self):
        # the shift approaches the constant offset of the leading frequency
        for H in (0.3, 0.7):
            Hm = min(H, 0.5)
            c = -(Hm - 0.5) ** 2 / (Hm + 0.5) * PI / 2
            errs = [abs(frequency_shift(nu, H) - c) for nu in (1e2, 1e4, 1e6)]
            assert errs[0] > errs[1] > errs[2]
        assert arg_x(10.0, 0.5) == 0.0


class TestQAlpha:
    @pytest.mark.parametrize("H", [0.1, 0.25, 0.3, 0.45])
    def test_matches_leading_frequency(self, H):
        # pi n - q pi / 2 equals the fBm frequency at H
        q = q_alpha(H)
        assert PI * 7 - q * PI / 2 == pytest.approx(nu_fbm(H, 7), rel=1e-14)

    @pytest.mark.parametrize("H", [0.1, 0.25, 0.3, 0.45])
    def test_arcsin_form_with_limit(self, H):
        assert q_alpha_arcsin(H, b_alpha_limit(H)) == pytest.approx(q_alpha(H), abs=1e-12)
