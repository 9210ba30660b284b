"""Semiparametric M-estimation with exchangeable-weight bootstrap inference.

Three models ship: Cox regression for right-censored data, Cox regression
for current status data, and the partly linear regression model.  Every fit
accepts a weight vector, so a bootstrap replicate is the same computation
under exchangeable random weights.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .estimation import FitOptions, FitResult, SigmaEstimate, fit, profile_curvature
from .estimators import (
    CoxCurrentStatusEstimator,
    CoxRightCensoredEstimator,
    ExchangeableBootstrap,
    PartlyLinearRegressor,
)
from .exceptions import SemibootError
from .functions import LinearHazard, SplineFunction, SplineSettings, StepFunction
from .inference import (
    BootstrapResult,
    ConfidenceSet,
    empirical_quantile,
    hybrid_ci,
    ks_distance,
    percentile_ci,
    run_bootstrap,
    t_ci,
)
from .models import ModelConfig, build_model, generate_data, read_csv
from .weights import BAYESIAN, EFRON, UNIT, WeightScheme, draw_weights, empirical_c_squared, scheme_constant

__all__ = [
    "__version__",
    "BAYESIAN",
    "BootstrapResult",
    "ConfidenceSet",
    "CoxCurrentStatusEstimator",
    "CoxRightCensoredEstimator",
    "EFRON",
    "ExchangeableBootstrap",
    "FitOptions",
    "FitResult",
    "LinearHazard",
    "ModelConfig",
    "PartlyLinearRegressor",
    "SemibootError",
    "SigmaEstimate",
    "SplineFunction",
    "SplineSettings",
    "StepFunction",
    "UNIT",
    "WeightScheme",
    "build_model",
    "draw_weights",
    "empirical_c_squared",
    "empirical_quantile",
    "fit",
    "generate_data",
    "hybrid_ci",
    "ks_distance",
    "percentile_ci",
    "profile_curvature",
    "read_csv",
    "run_bootstrap",
    "scheme_constant",
    "t_ci",
]
