"""Gaussian predictive model on top of a deterministic regressor.

The regression function supplies the mean; the variance is estimated by
locally weighted maximum likelihood over a held-out sample set, weighted
by a Gaussian kernel with a constant floor. Anomaly scores are negative
Gaussian log likelihoods.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DataError, GaussianPredictive, ReferenceSet, Sample, TestSet

SIGMA2_EPS = 1e-12


@dataclass(frozen=True)
class VarianceConfig:
    """Kernel floor w0, bandwidth eta0, and an optional variance fallback.

    Defaults follow the guidance for standardized inputs: eta0 = 1 and
    w0 around 5. Large w0 approaches constant (unweighted) weighting.
    """

    w0: float = 5.0
    eta0: float = 1.0
    fallback_sigma2: float | None = None

    def __post_init__(self):
        if not self.eta0 > 0:
            raise DataError("eta0 must be positive")
        if self.w0 < 0:
            raise DataError("w0 must be non-negative")
        if self.fallback_sigma2 is not None and not self.fallback_sigma2 > 0:
            raise DataError("fallback_sigma2 must be positive")


def kernel_weights(xt: np.ndarray, ho: ReferenceSet, cfg: VarianceConfig) -> np.ndarray:
    """Similarity weights w_n = w0 + exp(-||x_n - xt||^2 / (2 eta0^2))."""
    xt = np.asarray(xt, dtype=float)
    d2 = np.sum((ho.x - xt) ** 2, axis=1)
    return cfg.w0 + np.exp(-d2 / (2.0 * cfg.eta0**2))


def estimate_variance(xt: np.ndarray, ho: ReferenceSet, h, cfg: VarianceConfig) -> float:
    """Locally weighted mean of squared held-out residuals at xt.

    The held-out set must exclude the test sample itself; use
    ReferenceSet.without_x to enforce leave-one-out. A degenerate result
    (below 1e-12) falls back to cfg.fallback_sigma2 or raises.
    """
    if ho.y is None:
        raise DataError("variance estimation needs held-out y values")
    w = kernel_weights(xt, ho, cfg)
    resid = ho.y - h.eval(ho.x)
    total = w.sum()
    if total <= 0:
        raise DataError("kernel weights sum to zero; increase w0")
    sigma2 = float((w / total) @ (resid**2))
    if sigma2 < SIGMA2_EPS:
        if cfg.fallback_sigma2 is not None:
            return cfg.fallback_sigma2
        raise DataError(
            "degenerate variance: held-out residuals are all (near) zero "
            "and no fallback_sigma2 was configured")
    return sigma2


def predictive_for(xt: np.ndarray, ho: ReferenceSet, h, cfg: VarianceConfig) -> GaussianPredictive:
    """Build the per-test-point Gaussian, applying leave-one-out on ho."""
    ho_loo = ho.without_x(xt)
    return GaussianPredictive(h, estimate_variance(xt, ho_loo, h, cfg))


def anomaly_score(s: Sample, gp: GaussianPredictive) -> float:
    """Negative log likelihood of y under N(f(x), sigma2)."""
    fx = gp.model.eval_one(s.x)
    return 0.5 * np.log(2.0 * np.pi * gp.sigma2) + (s.y - fx) ** 2 / (2.0 * gp.sigma2)


def collective_anomaly_score(ts: TestSet, gps) -> float:
    """Mean per-sample anomaly score over a test set."""
    gps = list(gps)
    if len(gps) != len(ts):
        raise DataError("need one predictive per test sample")
    if not gps:
        raise DataError("empty test set")
    return float(np.mean([anomaly_score(s, gp) for s, gp in zip(ts.samples, gps)]))
