"""scikit-learn style front end to the fitting and bootstrap layers.

The three model estimators take covariates as ``X`` and the outcome as
``y``; ``sample_weight`` feeds the weighted criterion directly, which is
how an exchangeable bootstrap replicate is expressed.
:class:`ExchangeableBootstrap` wraps any of them.

Examples
--------
>>> import numpy as np
>>> from semiboot import PartlyLinearRegressor
>>> rng = np.random.default_rng(0)
>>> w, z = rng.uniform(size=200), rng.uniform(size=200)
>>> X = np.column_stack([w, z])
>>> reg = PartlyLinearRegressor().fit(X, 0.7 * w)
>>> print(round(float(reg.coef_[0]), 6))
0.7
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from ._validation import check_covariates, check_event_target, check_response, check_sample_weight
from .estimation import FitOptions, fit, profile_curvature
from .exceptions import InvalidArgumentError, SemibootError
from .functions import SplineSettings
from .inference import CI_KINDS, confidence_sets, run_bootstrap
from .models import (
    CoxCSData,
    CoxCSModel,
    CoxRCData,
    CoxRCModel,
    PartlyLinearData,
    PartlyLinearModel,
)
from .weights import WeightScheme

__all__ = [
    "CoxRightCensoredEstimator",
    "CoxCurrentStatusEstimator",
    "PartlyLinearRegressor",
    "ExchangeableBootstrap",
]


class _SemiparametricEstimator(BaseEstimator):
    """Shared fit logic.  Subclasses supply ``_data`` and ``_model``.

    Fitted attributes: ``coef_`` (the Euclidean parameter), ``nuisance_``,
    ``criterion_``, ``converged_``, ``n_iter_``, ``n_features_in_`` and, with
    ``variance=True``, ``covariance_`` (the asymptotic variance of
    ``sqrt(n) (coef_ - theta)``).
    """

    def _options(self) -> FitOptions:
        return FitOptions(
            lower=self.lower, upper=self.upper, tol=self.tol, max_iter=self.max_iter,
            starts=self.starts, seed=int(self.random_state or 0),
        )

    def fit(self, X, y, sample_weight=None):
        data = self._data(X, y)
        w = check_sample_weight(sample_weight, data.n)
        model = self._model()
        res = fit(model, data, w, self._options())
        self.coef_ = res.theta_hat
        self.nuisance_ = res.eta_hat
        self.criterion_ = res.criterion
        self.converged_ = res.converged
        self.n_iter_ = res.iterations
        self.fit_result_ = res
        self.n_features_in_ = np.asarray(X).shape[1]
        self.covariance_ = None
        if self.variance:
            self.covariance_ = profile_curvature(model, data, res.theta_hat).matrix
        return self

    @property
    def theta_(self) -> np.ndarray:
        check_is_fitted(self, "coef_")
        return self.coef_


class _CoxMixin:
    def predict(self, X):
        """Linear risk score ``X @ coef_``."""
        check_is_fitted(self, "coef_")
        return check_covariates(X, n_features=self.n_features_in_) @ self.coef_


class CoxRightCensoredEstimator(_CoxMixin, _SemiparametricEstimator):
    """Cox regression for right-censored data with a Breslow nuisance.

    Parameters
    ----------
    lower, upper : float
        Box bounds for every coefficient.
    tol, max_iter, starts :
        Optimizer settings; ``starts`` adds random starts drawn with ``random_state``.
    variance : bool
        Also compute the profile-curvature variance estimate.

    ``y`` is ``(time, event)`` as an ``(n, 2)`` array or a pair of arrays.
    """

    def __init__(self, lower=-5.0, upper=5.0, tol=1e-6, max_iter=200, starts=0, random_state=None, variance=False):
        self.lower = lower
        self.upper = upper
        self.tol = tol
        self.max_iter = max_iter
        self.starts = starts
        self.random_state = random_state
        self.variance = variance

    def _data(self, X, y):
        X = check_covariates(X)
        time, event = check_event_target(y, X.shape[0])
        return CoxRCData(time, event, X)

    def _model(self):
        return CoxRCModel()

    def predict_cumulative_hazard(self, X, times):
        """``eta_hat(t) exp(x' coef_)``, shape ``(len(X), len(times))``."""
        risk = np.exp(self.predict(X))
        return np.outer(risk, self.nuisance_(np.atleast_1d(np.asarray(times, dtype=float))))


class CoxCurrentStatusEstimator(_CoxMixin, _SemiparametricEstimator):
    """Cox regression for current status data.

    ``y`` is ``(examination time, indicator)``.  The cumulative hazard is a
    monotone NPMLE bounded to ``[eps_floor, M]``.
    """

    def __init__(self, eps_floor=1e-8, M=4.0, lower=-5.0, upper=5.0, tol=1e-6, max_iter=200, starts=0,
                 random_state=None, variance=False):
        self.eps_floor = eps_floor
        self.M = M
        self.lower = lower
        self.upper = upper
        self.tol = tol
        self.max_iter = max_iter
        self.starts = starts
        self.random_state = random_state
        self.variance = variance

    def _data(self, X, y):
        X = check_covariates(X)
        time, event = check_event_target(y, X.shape[0])
        return CoxCSData(time, event, X)

    def _model(self):
        return CoxCSModel(self.eps_floor, self.M)

    def predict_event_probability(self, X, times):
        """``P(T <= t | x) = 1 - exp(-eta_hat(t) exp(x' coef_))``."""
        risk = np.exp(self.predict(X))
        cum = self.nuisance_(np.atleast_1d(np.asarray(times, dtype=float)))
        return -np.expm1(-np.outer(risk, cum))


class PartlyLinearRegressor(RegressorMixin, _SemiparametricEstimator):
    """Least-squares fit of ``y = theta * w + f(z) + noise``.

    ``X`` has two columns, ``w`` then ``z`` (in ``[0, 1]``); ``f`` is a
    centered cubic regression spline.

    Parameters
    ----------
    degree : int
    n_interior_knots : int or None
        ``None`` uses ``ceil(n ** (1/5)) + 2`` uniform knots.
    """

    def __init__(self, degree=3, n_interior_knots=None, lower=-5.0, upper=5.0, tol=1e-6, max_iter=200,
                 starts=0, random_state=None, variance=False):
        self.degree = degree
        self.n_interior_knots = n_interior_knots
        self.lower = lower
        self.upper = upper
        self.tol = tol
        self.max_iter = max_iter
        self.starts = starts
        self.random_state = random_state
        self.variance = variance

    def _data(self, X, y):
        X = check_covariates(X, n_features=2)
        return PartlyLinearData(check_response(y, X.shape[0]), X[:, 0], X[:, 1])

    def _model(self):
        return PartlyLinearModel(SplineSettings(self.degree, self.n_interior_knots))

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_covariates(X, n_features=2)
        return self.coef_[0] * X[:, 0] + self.nuisance_(X[:, 1])


class ExchangeableBootstrap(BaseEstimator):
    """Bootstrap confidence sets for the Euclidean parameter of ``estimator``.

    Parameters
    ----------
    estimator : one of the model estimators in this module
    scheme : {"efron", "bayesian"}
    n_bootstrap : int
        Number of weighted refits ``B``.
    alpha : float
        Sets have nominal level ``1 - alpha``.
    ci : sequence of {"percentile", "hybrid", "t"}
    studentize : {"shared", "per-replicate"}
        Variance used for the t-type set.
    random_state : int
        Master seed; replicate ``b`` uses a seed derived from ``(random_state, b)``.
    n_jobs : int

    Attributes
    ----------
    coef_ : ndarray
    replicates_ : ndarray of shape (B - failures, d)
    intervals_ : dict mapping kind to :class:`~semiboot.inference.ConfidenceSet`
    c_ : float
    failures_ : int
    """

    def __init__(self, estimator=None, scheme="efron", n_bootstrap=1000, alpha=0.05, ci=CI_KINDS,
                 studentize="shared", random_state=0, n_jobs=1):
        self.estimator = estimator
        self.scheme = scheme
        self.n_bootstrap = n_bootstrap
        self.alpha = alpha
        self.ci = ci
        self.studentize = studentize
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y, sample_weight=None):
        if sample_weight is not None:
            raise InvalidArgumentError("the bootstrap draws its own weights; sample_weight is not supported")
        est = clone(self.estimator if self.estimator is not None else CoxRightCensoredEstimator())
        kinds = (self.ci,) if isinstance(self.ci, str) else tuple(self.ci)
        data = est._data(X, y)
        model = est._model()
        est.fit(X, y)
        sigma = None
        if "t" in kinds:
            try:
                sigma = profile_curvature(model, data, est.coef_)
            except SemibootError:
                sigma = None
        boot = run_bootstrap(
            model, data, WeightScheme.from_name(self.scheme), self.n_bootstrap, int(self.random_state or 0),
            est._options(), jobs=self.n_jobs, studentize=self.studentize if "t" in kinds else None,
            theta_hat=est.coef_,
        )
        self.estimator_ = est
        self.coef_ = est.coef_
        self.bootstrap_ = boot
        self.replicates_ = boot.replicates
        self.c_ = boot.c
        self.failures_ = boot.failures
        self.sigma_ = sigma
        self.intervals_ = confidence_sets(boot, self.alpha, kinds, sigma)
        return self

    def predict(self, X):
        check_is_fitted(self, "estimator_")
        return self.estimator_.predict(X)
