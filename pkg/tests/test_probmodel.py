import math

import mpmath as mp
import numpy as np
import pytest

import anomattr as A
from anomattr.core import DataError


def nll_oracle(resid, sigma2):
    """High-precision negative log Gaussian likelihood."""
    mp.mp.dps = 40
    v = mp.log(2 * mp.pi * mp.mpf(sigma2)) / 2 + mp.mpf(resid) ** 2 / (2 * mp.mpf(sigma2))
    return float(v)


def const_model(c=0.0):
    return A.register_builtin("constant", {"c": c})


class TestKernelWeights:
    def test_at_test_point(self):
        ho = A.ReferenceSet([[1.0, 2.0]], [0.0], "held-out")
        w = A.kernel_weights(np.array([1.0, 2.0]), ho, A.VarianceConfig(w0=0.0))
        assert w[0] == 1.0

    def test_floor_at_distance(self):
        ho = A.ReferenceSet([[1e4]], [0.0], "held-out")
        w = A.kernel_weights(np.array([0.0]), ho, A.VarianceConfig(w0=5.0))
        assert w[0] == pytest.approx(5.0)

    def test_direct_substitution(self):
        # squared distance 2, eta0 1, w0 0 -> exp(-1)
        ho = A.ReferenceSet([[1.0, 1.0]], [0.0], "held-out")
        w = A.kernel_weights(np.array([0.0, 0.0]), ho,
                             A.VarianceConfig(w0=0.0, eta0=1.0))
        assert w[0] == pytest.approx(math.exp(-1.0), abs=1e-9)

    def test_all_weights_at_least_w0(self):
        rng = np.random.default_rng(2)
        ho = A.ReferenceSet(rng.normal(size=(30, 3)), np.zeros(30), "held-out")
        w = A.kernel_weights(rng.normal(size=3), ho, A.VarianceConfig(w0=5.0))
        assert np.all(w >= 5.0)


class TestEstimateVariance:
    def test_constant_residual_any_weights(self):
        h = const_model(0.0)
        rng = np.random.default_rng(0)
        X = rng.normal(size=(20, 2))
        ho = A.ReferenceSet(X, np.full(20, 3.0), "held-out")  # residual 3 everywhere
        s2 = A.estimate_variance(rng.normal(size=2), ho, h, A.VarianceConfig())
        assert s2 == pytest.approx(9.0, rel=1e-12)

    def test_equal_weights_mean(self):
        h = const_model(0.0)
        # same location twice -> equal weights; residuals 1 and 3
        ho = A.ReferenceSet([[5.0], [5.0]], [1.0, 3.0], "held-out")
        s2 = A.estimate_variance(np.array([0.0]), ho, h, A.VarianceConfig(w0=0.0))
        assert s2 == pytest.approx(5.0, rel=1e-12)

    def test_degenerate_weighting(self):
        h = const_model(0.0)
        # first point at the test location (weight 1), second far away (weight ~0)
        ho = A.ReferenceSet([[0.0], [1e4]], [1.0, 3.0], "held-out")
        s2 = A.estimate_variance(np.array([0.0]), ho, h,
                                 A.VarianceConfig(w0=0.0, eta0=1.0))
        assert s2 == pytest.approx(1.0, abs=1e-9)

    def test_w0_limit_is_unweighted_mean(self):
        h = const_model(0.0)
        rng = np.random.default_rng(9)
        X = rng.normal(size=(40, 2))
        y = rng.normal(size=40)
        ho = A.ReferenceSet(X, y, "held-out")
        s2 = A.estimate_variance(rng.normal(size=2), ho, h,
                                 A.VarianceConfig(w0=1e9))
        assert s2 == pytest.approx(float(np.mean(y**2)), abs=1e-6)

    def test_zero_residuals_fallback(self):
        h = const_model(2.0)
        ho = A.ReferenceSet([[0.0], [1.0]], [2.0, 2.0], "held-out")
        with pytest.raises(DataError, match="degenerate variance"):
            A.estimate_variance(np.array([0.5]), ho, h, A.VarianceConfig())
        s2 = A.estimate_variance(np.array([0.5]), ho, h,
                                 A.VarianceConfig(fallback_sigma2=1.0))
        assert s2 == 1.0

    def test_leave_one_out_poisoned_y(self):
        h = const_model(0.0)
        rng = np.random.default_rng(4)
        X = rng.normal(size=(25, 2))
        y = rng.normal(size=25)
        xt = X[7].copy()
        clean = A.ReferenceSet(np.delete(X, 7, axis=0), np.delete(y, 7), "held-out")
        poisoned_y = y.copy()
        poisoned_y[7] = 1e6
        poisoned = A.ReferenceSet(X, poisoned_y, "held-out")
        cfg = A.VarianceConfig()
        direct = A.estimate_variance(xt, clean, h, cfg)
        via_loo = A.predictive_for(xt, poisoned, h, cfg).sigma2
        assert via_loo == pytest.approx(direct, rel=1e-12)


class TestAnomalyScore:
    def test_zero_residual(self):
        gp = A.GaussianPredictive(const_model(1.0), 1.0)
        s = A.Sample([0.0], 1.0)
        assert A.anomaly_score(s, gp) == pytest.approx(0.9189385332046727, abs=1e-12)

    def test_residual_two(self):
        gp = A.GaussianPredictive(const_model(0.0), 1.0)
        s = A.Sample([0.0], 2.0)
        assert A.anomaly_score(s, gp) == pytest.approx(2.9189385332046727, abs=1e-12)

    def test_oracle_residual_one_sigma_four(self):
        gp = A.GaussianPredictive(const_model(0.0), 4.0)
        s = A.Sample([0.0], 1.0)
        expected = nll_oracle(1.0, 4.0)
        assert expected == pytest.approx(1.7370857137646181, abs=1e-12)
        assert A.anomaly_score(s, gp) == pytest.approx(expected, abs=1e-12)

    def test_monotone_in_residual(self):
        gp = A.GaussianPredictive(const_model(0.0), 2.5)
        scores = [A.anomaly_score(A.Sample([0.0], r), gp)
                  for r in (0.0, 0.5, 1.0, 2.0, 4.0)]
        assert all(a < b for a, b in zip(scores, scores[1:]))


class TestCollective:
    def test_single_sample_reduction(self):
        h = const_model(0.0)
        gp = A.GaussianPredictive(h, 1.0)
        ts = A.TestSet.from_arrays([[0.0]], [2.0], ("x1",))
        single = A.anomaly_score(ts.samples[0], gp)
        assert A.collective_anomaly_score(ts, [gp]) == pytest.approx(single)

    def test_two_identical_samples(self):
        h = const_model(0.0)
        gp = A.GaussianPredictive(h, 1.0)
        ts = A.TestSet.from_arrays([[0.0], [0.0]], [2.0, 2.0], ("x1",))
        one = A.anomaly_score(ts.samples[0], gp)
        assert A.collective_anomaly_score(ts, [gp, gp]) == pytest.approx(one)

    def test_arithmetic_mean(self):
        h = const_model(0.0)
        gp = A.GaussianPredictive(h, 1.0)
        ts = A.TestSet.from_arrays([[0.0], [0.0]], [0.0, 2.0], ("x1",))
        got = A.collective_anomaly_score(ts, [gp, gp])
        assert got == pytest.approx((0.9189385332046727 + 2.9189385332046727) / 2)
