from __future__ import annotations

import numpy as np
import pytest

from _oracles import cox_profile_value
from semiboot.estimation import FitOptions, fit, profile_curvature
from semiboot.exceptions import CurvatureError, DegenerateRiskSetError
from semiboot.models import CoxCSModel, CoxRCData, CoxRCModel, ModelConfig, PartlyLinearModel, generate_data
from semiboot.weights import EFRON, derive_seed, draw_weights


class _Quadratic:
    """Test double whose profiled criterion is ``-n (theta - a)' (theta - a) / 2``."""

    def __init__(self, a, sign=1.0):
        self.a = np.atleast_1d(np.asarray(a, float))
        self.sign = sign

    def profiler(self, data, w=None):
        outer = self

        class P:
            def criterion(self, theta):
                r = np.asarray(theta, float) - outer.a
                return -outer.sign * data.n * float(r @ r) / 2

            def nuisance(self, theta):
                return None

        return P()


class _Sized:
    def __init__(self, n, d=1):
        self.n, self.d = n, d


MODELS = {"cox-rc": CoxRCModel(), "cox-cs": CoxCSModel(), "partly-linear": PartlyLinearModel()}


def test_tiny_cox_matches_grid_oracle():
    y, delta, z = [1.0, 2.0, 3.0], [1, 1, 0], [[1.0], [0.0], [1.0]]
    data = CoxRCData(y, delta, z)
    grid = np.round(np.arange(-50000, 50001) * 1e-4, 10)
    values = np.array([cox_profile_value([t], y, delta, z) for t in grid])
    best = grid[np.argmax(values)]
    res = fit(CoxRCModel(), data)
    assert res.converged
    assert res.theta_hat[0] == pytest.approx(best, abs=2e-4)


def test_quadratic_hook_gives_unit_sigma():
    for d, a in ((1, [0.3]), (2, [0.3, -1.2])):
        sig = profile_curvature(_Quadratic(a), _Sized(250, d), a)
        np.testing.assert_allclose(sig.matrix, np.eye(d), atol=1e-6)
        assert sig.is_positive_definite()


def test_convex_criterion_raises_curvature_error():
    with pytest.raises(CurvatureError):
        profile_curvature(_Quadratic([0.0], sign=-1.0), _Sized(100), [0.0])


def test_quadratic_fit_reaches_maximizer():
    res = fit(_Quadratic([0.3, -1.2]), _Sized(50, 2))
    np.testing.assert_allclose(res.theta_hat, [0.3, -1.2], atol=1e-6)
    assert res.gradient_norm <= 1e-6 * (1 + abs(res.criterion))


def test_box_projection():
    res = fit(_Quadratic([7.0]), _Sized(50), options=FitOptions(lower=-5.0, upper=5.0))
    assert res.theta_hat[0] == pytest.approx(5.0, abs=1e-12)
    assert res.converged


def test_iteration_cap_returns_unconverged(rc_data):
    res = fit(CoxRCModel(), rc_data, options=FitOptions(max_iter=1))
    assert not res.converged
    assert res.iterations == 1
    assert np.isfinite(res.criterion)


def test_degenerate_risk_set_propagates():
    data = CoxRCData([1.0, 2.0], [0, 0], [[0.0], [1.0]])
    with pytest.raises(DegenerateRiskSetError):
        fit(CoxRCModel(), data)


@pytest.mark.parametrize("kind", list(MODELS))
def test_all_ones_weights_match_unit_fit(kind):
    data = generate_data(ModelConfig(kind=kind), 100, 3)
    # an Efron draw of all ones is a legal multinomial outcome
    a = fit(MODELS[kind], data)
    b = fit(MODELS[kind], data, np.ones(data.n))
    np.testing.assert_array_equal(a.theta_hat, b.theta_hat)
    assert a.criterion == b.criterion


@pytest.mark.parametrize("kind", list(MODELS))
def test_permutation_invariance(kind):
    data = generate_data(ModelConfig(kind=kind), 120, 4)
    w = draw_weights(EFRON, data.n, 4)
    perm = np.random.default_rng(4).permutation(data.n)
    a = fit(MODELS[kind], data, w)
    b = fit(MODELS[kind], data.take(perm), w[perm])
    np.testing.assert_allclose(a.theta_hat, b.theta_hat, atol=1e-10)


@pytest.mark.parametrize("kind", list(MODELS))
def test_criterion_beats_random_box_points(kind):
    data = generate_data(ModelConfig(kind=kind), 120, 5)
    model = MODELS[kind]
    res = fit(model, data)
    prof = model.profiler(data)
    points = np.random.default_rng(5).uniform(-5, 5, size=(50, data.d))
    assert all(prof.criterion(p) <= res.criterion + 1e-9 for p in points)


def test_multistart_never_worse(rc_data):
    single = fit(CoxRCModel(), rc_data)
    multi = fit(CoxRCModel(), rc_data, options=FitOptions(starts=4, seed=1))
    assert multi.criterion >= single.criterion - 1e-12
    np.testing.assert_allclose(multi.theta_hat, single.theta_hat, atol=1e-4)


def test_cox_sigma_matches_monte_carlo_variance():
    n, reps = 400, 500
    cfg = ModelConfig(kind="cox-rc", theta0=(0.5,))
    draws = [fit(CoxRCModel(), generate_data(cfg, n, derive_seed(21, r))).theta_hat[0] for r in range(reps)]
    mc = n * np.var(np.array(draws) - 0.5)
    data = generate_data(cfg, n, derive_seed(22, 0))
    sigma = profile_curvature(CoxRCModel(), data, fit(CoxRCModel(), data).theta_hat).matrix[0, 0]
    assert abs(sigma / mc - 1) <= 0.15
