"""Anomaly attribution for black-box regression models.

Given a queryable regressor f and a test sample whose target deviates
from the prediction, this package scores the anomaly via a Gaussian
likelihood and attributes it per input variable, either by likelihood
compensation (the sparse input shift restoring the likelihood) or by the
standard function-based explainers it is compared against.
"""
from .core import (AnomattrError, AttributionVector, ConvergenceError, DataError,
                   GaussianPredictive, ModelProtocolError, ReferenceSet, Sample,
                   ScalingRecord, TestSet, standardize, unscale_attribution,
                   unstandardize)
from .models import ModelHandle, builtin_names, connect_external, offset_by, register_builtin
from .probmodel import (VarianceConfig, anomaly_score, collective_anomaly_score,
                        estimate_variance, kernel_weights, predictive_for)
from .gradest import GradientConfig, slope_variance, smooth_gradient
from .lc import LcConfig, LcResult, lc_objective, phi_update, soft_threshold_step, solve_lc
from .baselines import (IgConfig, LimeConfig, SvConfig, deviation_wrap, eig_attribute,
                        ig_attribute, lasso_cd, lime_attribute, sv_attribute,
                        zscore_attribute)
from .analysis import (ConsistencyReport, ScoreDistribution,
                       bootstrap_variability, consistency_metrics,
                       hit25, kde_density, kendall_tau, sign_match_ratio,
                       spearman_rho, theorem_oracle_suite)
from . import synth

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
