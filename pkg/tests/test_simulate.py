from __future__ import annotations

import numpy as np
import pytest
from scipy import integrate

from semiboot.exceptions import InvalidArgumentError, UnsupportedModelError
from semiboot.functions import LinearHazard, StepFunction
from semiboot.inference import ConfidenceSet
from semiboot.models import CoxRCData, ModelConfig, efficient_score_cox_rc
from semiboot.reporting import dumps
from semiboot.simulate import (
    ExperimentConfig,
    coverage_experiment,
    expansion_check,
    expansion_remainder,
    imitation_summary,
    loglog_slope,
    rate_experiment,
    run_experiment,
    sup_norm_error,
    uniform_l2_error,
)

SMALL = dict(model=ModelConfig(), n=60, R=2, B=60, ci_kinds=("percentile", "hybrid"), master_seed=5)


def _box_sets(boot, alpha, sigma_hat):
    d = boot.d
    return {"box": ConfidenceSet("percentile", 1 - alpha, np.full(d, -5.0), np.full(d, 5.0))}


def _point_sets(boot, alpha, sigma_hat):
    return {"point": ConfidenceSet("percentile", 1 - alpha, boot.theta_hat, boot.theta_hat)}


def test_whole_box_interval_covers():
    rep = coverage_experiment(ExperimentConfig(**{**SMALL, "R": 1}), interval_fn=_box_sets)
    assert rep.summary["kinds"]["box"]["coverage"] == [1.0]


def test_point_interval_misses():
    rep = coverage_experiment(ExperimentConfig(**{**SMALL, "R": 1}), interval_fn=_point_sets)
    assert rep.summary["kinds"]["point"]["coverage"] == [0.0]


def test_coverage_summary_shape():
    rep = coverage_experiment(ExperimentConfig(**SMALL))
    s = rep.summary
    assert s["valid"] == 2 and s["aborted"] == 0
    for kind in ("percentile", "hybrid"):
        p = s["kinds"][kind]["coverage"][0]
        assert 0 <= p <= 1
        assert s["kinds"][kind]["se"][0] == pytest.approx(np.sqrt(p * (1 - p) / s["valid"]))


def test_experiments_are_reproducible():
    a = run_experiment("coverage", ExperimentConfig(**SMALL))
    b = run_experiment("coverage", ExperimentConfig(**SMALL))
    c = run_experiment("coverage", ExperimentConfig(**SMALL, jobs=2))
    assert dumps(a.summary) == dumps(b.summary) == dumps(c.summary)
    assert dumps(a.records) == dumps(c.records)


def test_identical_samples_have_zero_ks():
    x = np.random.default_rng(0).normal(size=300)
    assert imitation_summary(x, x, None)["ks_max"] == 0.0


def test_independent_normals_below_critical_value():
    rng = np.random.default_rng(1)
    out = imitation_summary(rng.normal(size=500), rng.normal(size=500), None)
    assert out["ks_max"] < 1.63 * np.sqrt(2 / 500)


def test_injected_root_n_errors_give_exact_slope():
    cfg = ExperimentConfig(n=None, n_grid=(100, 200, 400, 800, 1600), R=3)
    rep = rate_experiment(cfg, error_fn=lambda n, r, boot: 2.5 * n**-0.5)
    for label in ("estimate", "bootstrap"):
        assert rep.summary[label]["slope"] == pytest.approx(-0.5, abs=1e-12)
        assert rep.summary[label]["slope_se"] == pytest.approx(0.0, abs=1e-12)


def test_loglog_slope_cube_root():
    ns = np.array([10, 100, 1000, 10_000])
    slope, _ = loglog_slope(ns, 3 * ns ** (-1 / 3))
    assert slope == pytest.approx(-1 / 3, abs=1e-12)


def test_constant_covariate_remainder_is_root_n_deviation():
    rng = np.random.default_rng(2)
    n = 50
    data = CoxRCData(rng.exponential(size=n), rng.integers(0, 2, n), np.full((n, 1), 0.3))
    scores = efficient_score_cox_rc([0.5], LinearHazard(1.0), data)
    rem = expansion_remainder([0.62], [0.5], scores, [[2.0]], n)
    assert rem[0] == pytest.approx(np.sqrt(n) * 0.12, abs=1e-12)
    rem_b = expansion_remainder([0.62], [0.5], scores, [[2.0]], n, weights=rng.exponential(size=n))
    assert rem_b[0] == pytest.approx(np.sqrt(n) * 0.12, abs=1e-12)


def test_expansion_small_run():
    cfg = ExperimentConfig(n=None, n_grid=(50, 100, 200), R=3, master_seed=2)
    s = expansion_check(cfg).summary
    assert len(s["estimate"]["median_abs_remainder"]) == 3
    assert all(np.isfinite(s["bootstrap"]["median_abs_remainder"]))


def test_expansion_rejects_other_models():
    cfg = ExperimentConfig(model=ModelConfig(kind="cox-cs"), n=None, n_grid=(50, 100, 200), R=1)
    with pytest.raises(UnsupportedModelError):
        expansion_check(cfg)


def test_sup_norm_error_on_step_function():
    eta = StepFunction([0.5, 1.0], [0.4, 1.2])
    # gaps against t: 0.5 just before 0.5, 0.6 just before 1.0, 0.3 at 1.5
    assert sup_norm_error(eta, lambda t: t, 1.5) == pytest.approx(0.6)


def test_uniform_l2_error_against_quadrature():
    eta = StepFunction([0.3, 0.8, 1.2], [0.2, 0.9, 1.0])
    exact, _ = integrate.quad(lambda t: (eta(t) - t) ** 2, 0.2, 1.5, points=[0.3, 0.8, 1.2])
    assert uniform_l2_error(eta, 0.2, 1.5) == pytest.approx(np.sqrt(exact / 1.3), rel=1e-10)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"R": 0},
        {"n_grid": (100, 100, 200)},
        {"gamma_target": 0.2},
        {"alpha": 1.0},
        {"ci_kinds": ("bca",)},
        {"scheme": "unit"},
        {"studentize": "none"},
    ],
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig(**kwargs)


def test_rate_grid_requirements():
    with pytest.raises(InvalidArgumentError):
        rate_experiment(ExperimentConfig(n=None, n_grid=(100, 200, 400)))
    with pytest.raises(InvalidArgumentError):
        rate_experiment(ExperimentConfig(n=None, n_grid=(100, 200, 400, 800)))


def test_config_round_trip_and_unknown_keys():
    cfg = ExperimentConfig(**SMALL)
    assert ExperimentConfig.from_dict({"experiment": "coverage", **cfg.to_dict()}) == cfg
    with pytest.raises(InvalidArgumentError):
        ExperimentConfig.from_dict({"bogus": 1})


def test_unknown_experiment():
    with pytest.raises(InvalidArgumentError):
        run_experiment("bootstrap-of-bootstrap", ExperimentConfig())
