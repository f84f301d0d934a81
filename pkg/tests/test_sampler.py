import json
import math

import numpy as np
import pytest
from scipy.special import erf

from mfbm import _kernels_py, kernels
from mfbm.oracle import EigenSequence, build_covariance, covariance_kernel
from mfbm.sampler import (MCConfig, MCEstimate, cholesky_factor, cholesky_paths,
                          chisq_smallball, export_paths_csv, kl_paths, path_smallball,
                          write_estimate_json)
from mfbm.smallball import saddlepoint_probability
from mfbm.spectrum import lambda_bm

BACKENDS = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])


def midpoint_eigs(H, N):
    op = build_covariance(H, N)
    return EigenSequence(np.sort(np.linalg.eigvalsh(op.matrix))[::-1])


class TestStream:
    def test_splitmix_reference(self):
        # published first output of SplitMix64 seeded with 0
        assert hex(int(_kernels_py.splitmix(0, [0])[0])) == "0xe220a8397b1dcdaf"

    def test_splitmix_against_integer_reference(self):
        M = (1 << 64) - 1

        def ref(seed, k):
            z = (seed + (k + 1) * 0x9E3779B97F4A7C15) & M
            z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & M
            z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & M
            return z ^ (z >> 31)
        ks = [0, 1, 2, 1000, 2 ** 40 + 3]
        for seed in (0, 1, M):
            got = _kernels_py.splitmix(seed, ks)
            assert [int(x) for x in got] == [ref(seed, k) for k in ks]

    @pytest.mark.parametrize("name", BACKENDS)
    def test_backends_agree(self, name):
        k = kernels.backend(name)
        a = np.empty((300, 17))
        b = np.empty((300, 17))
        k.fill_normals(2024, 77, a)
        _kernels_py.fill_normals(2024, 77, b)
        assert np.allclose(a, b, rtol=0, atol=1e-12)
        lam = 1 / np.arange(1, 18) ** 2.0
        x, y = np.empty(300), np.empty(300)
        k.chisq_sums(5, 9, lam, x)
        _kernels_py.chisq_sums(5, 9, lam, y)
        assert np.allclose(x, y, rtol=1e-13)
        assert np.array_equal(k.splitmix(3, [0, 5]), _kernels_py.splitmix(3, [0, 5]))

    def test_batch_independence(self):
        a = np.empty((100, 8))
        kernels.fill_normals(1, 0, a)
        b = np.empty((30, 8))
        kernels.fill_normals(1, 40, b)
        assert np.array_equal(a[40:70], b)

    def test_chisq_sums_match_normals(self):
        lam = np.array([0.5, 0.25, 0.125])
        z = np.empty((50, 3))
        kernels.fill_normals(11, 3, z)
        s = np.empty(50)
        kernels.chisq_sums(11, 3, lam, s)
        assert np.allclose(s, (z * z) @ lam, rtol=1e-14)

    def test_gaussian_moments(self):
        z = np.empty((20000, 16))
        kernels.fill_normals(123, 0, z)
        x = z.ravel()
        se = 1 / math.sqrt(x.size)
        assert abs(x.mean()) < 5 * se
        assert abs(x.var() - 1) < 5 * math.sqrt(2) * se
        assert abs(np.mean(x ** 4) - 3) < 5 * math.sqrt(96) * se
        # pairs from one Box-Muller draw are uncorrelated
        assert abs(np.mean(z[:, 0] * z[:, 1])) < 5 / math.sqrt(z.shape[0])

    def test_bad_backend(self, monkeypatch):
        with pytest.raises(ValueError):
            kernels.backend("fortran")


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(samples=99), dict(seed=-1), dict(seed=2 ** 64),
                                    dict(grid=1), dict(variant="qmc"), dict(batch=0)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            MCConfig(**kw)

    def test_estimate_fields(self):
        cfg = MCConfig(400, 1, 8, "chisq")
        e = MCEstimate.from_hits(100, cfg)
        assert e.probability == 0.25
        assert e.std_error == pytest.approx(math.sqrt(0.25 * 0.75 / 400))
        lo, hi = e.interval()
        assert 0 <= lo < 0.25 < hi <= 1
        assert json.loads(json.dumps(e.to_dict()))["config"]["seed"] == 1


class TestPaths:
    def test_variance_at_one(self):
        cfg = MCConfig(40_000, 7, 64)
        for H in (0.5, 0.3, 0.8):
            b = cholesky_paths(H, 64, cfg)
            # last node is 1 - 1/128; K(t, t) = t + t^(2H)
            t = b.t[-1]
            v = t + t ** (2 * H)
            se = v * math.sqrt(2 / cfg.samples)
            assert abs(b.values[:, -1].var() - v) < 5 * se

    def test_half_is_scaled_bm(self):
        L, jitter = cholesky_factor(0.5, 32)
        t = (np.arange(32) + 0.5) / 32
        assert jitter == 0.0
        assert np.allclose(L @ L.T, 2 * np.minimum(t[:, None], t[None, :]), atol=1e-13)

    def test_covariance_law(self):
        H, N, m = 0.75, 256, 100_000
        b = cholesky_paths(H, N, MCConfig(m, 99, N))
        X = b.values
        C = X.T @ X / m
        K = covariance_kernel(H, b.t[:, None], b.t[None, :])
        # Var(X_s X_t) = K_ss K_tt + K_st^2 for centred Gaussians
        se = np.sqrt((np.outer(np.diag(K), np.diag(K)) + K * K) / m)
        assert np.max(np.abs(C - K) / se) < 5

    def test_deterministic(self):
        cfg = MCConfig(200, 5, 32)
        a = cholesky_paths(0.3, 32, cfg, count=10)
        b = cholesky_paths(0.3, 32, cfg, count=10)
        assert np.array_equal(a.values, b.values)
        c = cholesky_paths(0.3, 32, MCConfig(200, 6, 32), count=10)
        assert not np.array_equal(a.values, c.values)

    def test_jitter_on_failure(self, caplog, monkeypatch):
        from scipy import linalg
        import mfbm.sampler as smp
        real = linalg.cholesky
        calls = []

        def flaky(a, **kw):
            calls.append(1)
            if len(calls) == 1:
                raise linalg.LinAlgError("not positive definite")
            return real(a, **kw)
        monkeypatch.setattr(smp.linalg, "cholesky", flaky)
        with caplog.at_level("WARNING"):
            L, jitter = cholesky_factor(0.3, 16)
        K = build_covariance(0.3, 16).kernel
        assert jitter == pytest.approx(1e-12 * np.trace(K) / 16)
        assert "jitter" in caplog.text

    def test_kl_paths_full_rank_matches_law(self):
        N = 32
        b = kl_paths(0.7, N, MCConfig(50_000, 3, N), modes=N)
        K = covariance_kernel(0.7, b.t[:, None], b.t[None, :])
        C = b.values.T @ b.values / 50_000
        se = np.sqrt((np.outer(np.diag(K), np.diag(K)) + K * K) / 50_000)
        assert np.max(np.abs(C - K) / se) < 5
        with pytest.raises(ValueError):
            kl_paths(0.7, N, MCConfig(100, 3, N), modes=0)

    def test_export(self, tmp_path):
        b = cholesky_paths(0.7, 16, MCConfig(100, 42, 16), count=3)
        p = export_paths_csv(tmp_path / "p.csv", b)
        lines = p.read_text().splitlines()
        assert lines[0] == "path,t,value" and len(lines) == 1 + 3 * 16
        assert float(lines[1].split(",")[2]) == b.values[0, 0]


class TestEstimators:
    def test_single_eigenvalue(self):
        cfg = MCConfig(200_000, 17, 2, "chisq")
        e = chisq_smallball([1.0], 0.1, cfg)
        exact = erf(math.sqrt(0.05))
        assert exact == pytest.approx(0.2481, abs=1e-4)
        assert abs(e.probability - exact) < 4 * e.std_error

    def test_large_radius(self):
        e = chisq_smallball([1.0, 0.5], 200.0, MCConfig(1000, 1, 2, "chisq"))
        assert e.probability == 1.0 and e.std_error == 0.0

    def test_bm_against_saddlepoint(self):
        eigs = EigenSequence(lambda_bm(np.arange(1, 2001)))
        e = chisq_smallball(eigs, 0.25, MCConfig(200_000, 8, 2000, "chisq"))
        sp = saddlepoint_probability(0.25, eigs)
        assert abs(e.probability - sp) < 3 * e.std_error
        assert e.tail_bound == 0.0

    def test_tail_bound_reported(self):
        eigs = EigenSequence(lambda_bm(np.arange(1, 101)),
                             tail=lambda t: 1 / ((t - 0.5) * math.pi) ** 2, tail_decay=2.0)
        e = chisq_smallball(eigs, 0.25, MCConfig(1000, 8, 50, "chisq"))
        expect = lambda_bm(np.arange(51, 101)).sum() + 1 / (math.pi ** 2 * 100)
        assert e.tail_bound == pytest.approx(expect, rel=1e-6)

    def test_seed_determinism(self):
        eigs = EigenSequence(lambda_bm(np.arange(1, 65)))
        a = chisq_smallball(eigs, 0.2, MCConfig(3000, 9, 64, "chisq", batch=100))
        b = chisq_smallball(eigs, 0.2, MCConfig(3000, 9, 64, "chisq", batch=3000))
        assert a.hits == b.hits and a.to_dict()["probability"] == b.to_dict()["probability"]
        p1 = path_smallball(0.3, 0.5, MCConfig(2000, 4, 64, batch=300))
        p2 = path_smallball(0.3, 0.5, MCConfig(2000, 4, 64, batch=2000))
        assert p1.hits == p2.hits

    def test_half_path_matches_doubled_bm(self):
        cfg = MCConfig(100_000, 21, 128)
        p = path_smallball(0.5, 0.5, cfg)
        c = chisq_smallball(2 * lambda_bm(np.arange(1, 5001)), 0.25,
                            MCConfig(100_000, 22, 5000, "chisq"))
        joint = math.hypot(p.std_error, c.std_error)
        # midpoint law at N=128 differs from the continuum by far less than one SE
        assert abs(p.probability - c.probability) < 3 * joint

    @pytest.mark.slow
    @pytest.mark.parametrize("H", [0.3, 0.5, 0.7])
    @pytest.mark.parametrize("eps", [0.3, 0.5])
    def test_estimators_agree(self, H, eps):
        N, m = 512, 100_000
        p = path_smallball(H, eps, MCConfig(m, 101, N))
        c = chisq_smallball(midpoint_eigs(H, N), eps * eps, MCConfig(m, 202, N, "chisq"))
        joint = math.hypot(p.std_error, c.std_error)
        assert abs(p.probability - c.probability) < 3 * joint

    def test_truncation_monotone(self):
        eigs = midpoint_eigs(0.3, 256)
        est = [chisq_smallball(eigs, 0.09, MCConfig(50_000, 5, n, "chisq")).probability
               for n in (4, 16, 256)]
        # common random numbers: dropping terms can only enlarge the event
        assert est[0] >= est[1] >= est[2]

    def test_bulk(self):
        p = path_smallball(0.7, 2.0, MCConfig(20_000, 1, 64))
        assert p.probability > 0.5

    def test_errors(self):
        with pytest.raises(ValueError):
            chisq_smallball([1.0], 0.0, MCConfig(100, 1, 1, "chisq"))
        with pytest.raises(ValueError):
            path_smallball(0.3, -1.0, MCConfig(100, 1, 8))

    def test_json(self, tmp_path):
        e = path_smallball(0.7, 0.3, MCConfig(1000, 42, 32))
        d = json.loads(write_estimate_json(tmp_path / "e.json", e).read_text())
        assert d["config"]["seed"] == 42 and 0 <= d["probability"] <= 1
