from __future__ import annotations

import doctest

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

import semiboot.estimators as estimators_module
from semiboot import (
    CoxCurrentStatusEstimator,
    CoxRightCensoredEstimator,
    ExchangeableBootstrap,
    PartlyLinearRegressor,
)
from semiboot.estimation import fit
from semiboot.exceptions import InvalidArgumentError
from semiboot.models import CoxCSModel, CoxRCModel, PartlyLinearModel


def test_module_doctest():
    assert doctest.testmod(estimators_module).failed == 0


@pytest.mark.parametrize("cls", [CoxRightCensoredEstimator, CoxCurrentStatusEstimator, PartlyLinearRegressor, ExchangeableBootstrap])
def test_params_round_trip_through_clone(cls):
    est = cls()
    params = est.get_params()
    assert clone(est).get_params() == params
    assert est.set_params(**params) is est


def test_cox_rc_estimator_matches_functional_fit(rc_data):
    est = CoxRightCensoredEstimator(variance=True).fit(rc_data.z, np.column_stack([rc_data.y, rc_data.delta]))
    ref = fit(CoxRCModel(), rc_data)
    np.testing.assert_array_equal(est.coef_, ref.theta_hat)
    assert est.converged_ and est.covariance_.shape == (1, 1)
    np.testing.assert_allclose(est.predict(rc_data.z), rc_data.z @ ref.theta_hat)
    H = est.predict_cumulative_hazard(rc_data.z[:3], [0.5, 1.0])
    assert H.shape == (3, 2) and np.all(np.diff(H, axis=1) >= 0)


def test_target_formats_agree(rc_data):
    X = rc_data.z
    a = CoxRightCensoredEstimator().fit(X, (rc_data.y, rc_data.delta)).coef_
    rec = np.zeros(rc_data.n, dtype=[("event", bool), ("time", float)])
    rec["event"], rec["time"] = rc_data.delta == 1, rc_data.y
    b = CoxRightCensoredEstimator().fit(X, rec).coef_
    np.testing.assert_array_equal(a, b)


def test_sample_weight_is_the_bootstrap_weight(rc_data):
    w = np.random.default_rng(0).exponential(size=rc_data.n)
    w *= rc_data.n / w.sum()
    est = CoxRightCensoredEstimator().fit(rc_data.z, (rc_data.y, rc_data.delta), sample_weight=w)
    np.testing.assert_array_equal(est.coef_, fit(CoxRCModel(), rc_data, w).theta_hat)


def test_current_status_estimator(cs_data):
    est = CoxCurrentStatusEstimator().fit(cs_data.z, (cs_data.c, cs_data.delta))
    np.testing.assert_array_equal(est.coef_, fit(CoxCSModel(), cs_data).theta_hat)
    p = est.predict_event_probability(cs_data.z[:4], [0.5, 1.5])
    assert np.all((p >= 0) & (p <= 1)) and np.all(p[:, 1] >= p[:, 0])


def test_partly_linear_regressor(pl_data):
    X = np.column_stack([pl_data.w, pl_data.z])
    reg = PartlyLinearRegressor().fit(X, pl_data.y)
    ref = fit(PartlyLinearModel(), pl_data)
    np.testing.assert_array_equal(reg.coef_, ref.theta_hat)
    np.testing.assert_allclose(reg.predict(X), ref.theta_hat[0] * pl_data.w + ref.eta_hat(pl_data.z))
    assert -1 < reg.score(X, pl_data.y) <= 1


def test_input_validation(rc_data):
    with pytest.raises(ValueError):
        CoxRightCensoredEstimator().fit(rc_data.z, rc_data.y)
    with pytest.raises(ValueError):
        PartlyLinearRegressor().fit(np.ones((5, 3)), np.ones(5))
    est = CoxRightCensoredEstimator().fit(rc_data.z, (rc_data.y, rc_data.delta))
    with pytest.raises(ValueError):
        est.predict(np.ones((2, 2)))


def test_unfitted_predict_raises():
    with pytest.raises(NotFittedError):
        PartlyLinearRegressor().predict(np.ones((2, 2)))


def test_exchangeable_bootstrap(rc_data):
    boot = ExchangeableBootstrap(CoxRightCensoredEstimator(), n_bootstrap=60, random_state=3).fit(
        rc_data.z, (rc_data.y, rc_data.delta)
    )
    assert boot.c_ == 1.0 and boot.failures_ == 0
    assert boot.replicates_.shape == (60, 1)
    assert set(boot.intervals_) == {"percentile", "hybrid", "t"}
    for ci in boot.intervals_.values():
        assert ci.lower[0] <= ci.upper[0]
    again = ExchangeableBootstrap(CoxRightCensoredEstimator(), n_bootstrap=60, random_state=3).fit(
        rc_data.z, (rc_data.y, rc_data.delta)
    )
    np.testing.assert_array_equal(boot.replicates_, again.replicates_)
    with pytest.raises(InvalidArgumentError):
        boot.fit(rc_data.z, (rc_data.y, rc_data.delta), sample_weight=np.ones(rc_data.n))
