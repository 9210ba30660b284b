"""Monte Carlo experiments for bootstrap behaviour at finite sample sizes.

Four experiments: confidence-set coverage, bootstrap versus sampling
distribution of the rescaled estimator, convergence rates of the nuisance
estimate, and the size of the remainder in the first-order expansion of
``theta_hat``.  Replication ``r`` draws everything from seeds derived from
``(master_seed, stream, ..., r)``, so reports do not depend on scheduling.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .estimation import FitOptions, SigmaEstimate, fit, profile_curvature
from .exceptions import InvalidArgumentError, SemibootError, UnsupportedModelError
from .functions import LinearHazard, StepFunction
from .inference import (
    CI_KINDS,
    confidence_sets,
    ks_distance,
    normal_ks_distance,
    run_bootstrap,
)
from .models import (
    COX_CS,
    COX_RC,
    ModelConfig,
    build_model,
    efficient_score_cox_rc,
    f0_partly_linear,
    generate_data,
)
from .weights import WeightScheme, derive_seed, draw_weights, scheme_constant

__all__ = [
    "EXPERIMENTS",
    "ExperimentConfig",
    "SimulationReport",
    "coverage_experiment",
    "consistency_experiment",
    "rate_experiment",
    "expansion_check",
    "run_experiment",
    "loglog_slope",
    "imitation_summary",
    "expansion_remainder",
    "sup_norm_error",
    "uniform_l2_error",
    "empirical_l2_error",
]

logger = logging.getLogger(__name__)

# seed streams
_DATA, _BOOT, _FIXED_DATA, _FIXED_BOOT = 0, 1, 2, 3


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    n: int | None = 200
    n_grid: tuple[int, ...] | None = None
    R: int = 100
    B: int = 500
    scheme: str = "efron"
    alpha: float = 0.05
    master_seed: int = 0
    gamma_target: float = 0.5
    ci_kinds: tuple[str, ...] = CI_KINDS
    studentize: str = "shared"
    fit: FitOptions = field(default_factory=FitOptions)
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.model, dict):
            object.__setattr__(self, "model", ModelConfig.from_dict(self.model))
        if isinstance(self.fit, dict):
            object.__setattr__(self, "fit", FitOptions.from_dict(self.fit))
        if self.R < 1 or self.B < 1:
            raise InvalidArgumentError("R and B must be >= 1")
        if self.n is not None and self.n < 1:
            raise InvalidArgumentError("n must be >= 1")
        if self.n_grid is not None:
            grid = tuple(int(v) for v in self.n_grid)
            if any(b <= a for a, b in zip(grid, grid[1:])) or not grid or grid[0] < 1:
                raise InvalidArgumentError("n_grid must be strictly increasing positive integers")
            object.__setattr__(self, "n_grid", grid)
        if not 0.25 < self.gamma_target <= 0.5:
            raise InvalidArgumentError("gamma_target must lie in (1/4, 1/2]")
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError("alpha must lie in (0, 1)")
        kinds = tuple(self.ci_kinds)
        if any(k not in CI_KINDS for k in kinds):
            raise InvalidArgumentError(f"ci_kinds must be drawn from {CI_KINDS}")
        object.__setattr__(self, "ci_kinds", kinds)
        if self.studentize not in ("shared", "per-replicate"):
            raise InvalidArgumentError("studentize must be 'shared' or 'per-replicate'")
        scheme_constant(WeightScheme.from_name(self.scheme))
        if self.jobs < 1:
            raise InvalidArgumentError("jobs must be >= 1")

    @property
    def weight_scheme(self) -> WeightScheme:
        return WeightScheme.from_name(self.scheme)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "n": self.n,
            "n_grid": list(self.n_grid) if self.n_grid is not None else None,
            "R": self.R,
            "B": self.B,
            "scheme": self.scheme,
            "alpha": self.alpha,
            "master_seed": self.master_seed,
            "gamma_target": self.gamma_target,
            "ci_kinds": list(self.ci_kinds),
            "studentize": self.studentize,
            "fit": self.fit.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        d.pop("experiment", None)
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgumentError(f"unknown experiment config keys: {sorted(unknown)}")
        for key in ("n_grid", "ci_kinds"):
            if isinstance(d.get(key), list):
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class SimulationReport:
    experiment: str
    config: dict
    summary: dict
    records: list = field(default_factory=list)
    runtime: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": self.config,
            "summary": self.summary,
            "runtime": self.runtime,
        }


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * jobs))))


def _timed(experiment, cfg, fn):
    start = time.perf_counter()
    summary, records = fn()
    elapsed = time.perf_counter() - start
    return SimulationReport(experiment, cfg.to_dict(), summary, records, {"elapsed_seconds": elapsed})


def _binomial_se(p: float, r: int) -> float:
    return math.sqrt(p * (1 - p) / r) if r else float("nan")


# ---------------------------------------------------------------------------
# coverage


def _coverage_one(args):
    cfg, r, interval_fn = args
    model = build_model(cfg.model)
    data = generate_data(cfg.model, cfg.n, derive_seed(cfg.master_seed, _DATA, r))
    theta0 = np.asarray(cfg.model.theta0)
    try:
        base = fit(model, data, None, cfg.fit)
        if not base.converged:
            return {"r": r, "aborted": "full-data fit did not converge"}
        sigma_hat = None
        if "t" in cfg.ci_kinds:
            try:
                sigma_hat = profile_curvature(model, data, base.theta_hat)
            except SemibootError:
                sigma_hat = None
        boot = run_bootstrap(
            model, data, cfg.weight_scheme, cfg.B, derive_seed(cfg.master_seed, _BOOT, r), cfg.fit,
            studentize=cfg.studentize if "t" in cfg.ci_kinds else None, theta_hat=base.theta_hat,
        )
        if interval_fn is not None:
            sets = interval_fn(boot, cfg.alpha, sigma_hat)
        else:
            sets = confidence_sets(boot, cfg.alpha, cfg.ci_kinds, sigma_hat)
    except SemibootError as exc:
        return {"r": r, "aborted": f"{type(exc).__name__}: {exc}"}
    rec = {"r": r, "aborted": None, "theta_hat": base.theta_hat.tolist(), "failures": boot.failures}
    for kind, cs in sets.items():
        rec[kind] = {
            "lower": cs.lower.tolist(),
            "upper": cs.upper.tolist(),
            "covered": cs.contains(theta0).tolist(),
            "fallback": cs.fallback,
        }
    return rec


def coverage_experiment(cfg: ExperimentConfig, interval_fn=None) -> SimulationReport:
    """Fraction of replications whose confidence sets contain ``theta0``.

    ``interval_fn(boot, alpha, sigma_hat) -> {kind: ConfidenceSet}``
    replaces the standard constructions.
    """
    if cfg.n is None:
        raise InvalidArgumentError("coverage experiment needs n")

    def run():
        jobs = cfg.jobs if interval_fn is None else 1
        recs = _map(_coverage_one, [(cfg, r, interval_fn) for r in range(cfg.R)], jobs)
        valid = [rec for rec in recs if rec["aborted"] is None]
        kinds = [k for k, v in valid[0].items() if isinstance(v, dict)] if valid else []
        summary = {"n": cfg.n, "R": cfg.R, "valid": len(valid), "aborted": len(recs) - len(valid), "kinds": {}}
        for kind in kinds:
            covered = np.array([rec[kind]["covered"] for rec in valid], dtype=float)
            widths = np.array([np.subtract(rec[kind]["upper"], rec[kind]["lower"]) for rec in valid])
            cov = covered.mean(axis=0)
            summary["kinds"][kind] = {
                "coverage": cov.tolist(),
                "se": [_binomial_se(p, len(valid)) for p in cov],
                "mean_width": widths.mean(axis=0).tolist(),
                "fallbacks": sum(rec[kind]["fallback"] is not None for rec in valid),
            }
        summary["replicate_failures"] = int(sum(rec.get("failures", 0) for rec in valid))
        return summary, recs

    return _timed("coverage", cfg, run)


# ---------------------------------------------------------------------------
# distributional imitation


def imitation_summary(sampling, bootstrap, sigma: SigmaEstimate | None) -> dict:
    """Componentwise KS distances: sampling vs bootstrap, and each vs ``N(0, sigma)``."""
    s = np.asarray(sampling, dtype=float)
    b = np.asarray(bootstrap, dtype=float)
    s = s.reshape(s.shape[0], -1)
    b = b.reshape(b.shape[0], -1)
    d = s.shape[1]
    ks = [ks_distance(s[:, j], b[:, j]) for j in range(d)]
    out = {"ks_boot_vs_sampling": ks, "ks_max": max(ks)}
    if sigma is not None:
        sd = sigma.std
        out["ks_sampling_vs_normal"] = [normal_ks_distance(s[:, j], sd[j]) for j in range(d)]
        out["ks_bootstrap_vs_normal"] = [normal_ks_distance(b[:, j], sd[j]) for j in range(d)]
    out["sampling_var"] = np.var(s, axis=0, ddof=1).tolist() if s.shape[0] > 1 else None
    out["bootstrap_var"] = np.var(b, axis=0, ddof=1).tolist() if b.shape[0] > 1 else None
    return out


def _sampling_one(args):
    cfg, r = args
    model = build_model(cfg.model)
    data = generate_data(cfg.model, cfg.n, derive_seed(cfg.master_seed, _DATA, r))
    try:
        res = fit(model, data, None, cfg.fit)
    except SemibootError as exc:
        return r, None, str(exc)
    if not res.converged:
        return r, None, "not converged"
    return r, res.theta_hat.tolist(), None


def consistency_experiment(cfg: ExperimentConfig) -> SimulationReport:
    """Compare ``sqrt(n)(theta_hat - theta0)`` over fresh datasets with
    ``(sqrt(n)/c)(theta* - theta_hat)`` over bootstrap draws on one dataset."""
    if cfg.n is None:
        raise InvalidArgumentError("consistency experiment needs n")

    def run():
        n = cfg.n
        theta0 = np.asarray(cfg.model.theta0)
        recs = _map(_sampling_one, [(cfg, r) for r in range(cfg.R)], cfg.jobs)
        good = [rec for rec in recs if rec[1] is not None]
        sampling = math.sqrt(n) * (np.array([rec[1] for rec in good]) - theta0)

        model = build_model(cfg.model)
        data = generate_data(cfg.model, n, derive_seed(cfg.master_seed, _FIXED_DATA))
        base = fit(model, data, None, cfg.fit)
        try:
            sigma = profile_curvature(model, data, base.theta_hat)
        except SemibootError:
            sigma = None
        boot = run_bootstrap(
            model, data, cfg.weight_scheme, cfg.B, derive_seed(cfg.master_seed, _FIXED_BOOT), cfg.fit,
            jobs=cfg.jobs, theta_hat=base.theta_hat,
        )
        summary = {
            "n": n,
            "R": cfg.R,
            "sampling_failures": len(recs) - len(good),
            "B": cfg.B,
            "bootstrap_failures": boot.failures,
            "c": boot.c,
            "theta_hat_fixed": base.theta_hat.tolist(),
            "sigma_hat": sigma.matrix.tolist() if sigma is not None else None,
        }
        summary.update(imitation_summary(sampling, boot.deviations(), sigma))
        records = [{"source": "sampling", "r": rec[0], "deviation": dev.tolist()} for rec, dev in zip(good, sampling)]
        records += [{"source": "bootstrap", "r": b, "deviation": dev.tolist()} for b, dev in enumerate(boot.deviations())]
        return summary, records

    return _timed("consistency", cfg, run)


# ---------------------------------------------------------------------------
# nuisance rates


def sup_norm_error(eta: StepFunction, eta0, upper: float) -> float:
    """``sup_{0 <= t <= upper} |eta(t) - eta0(t)|`` for increasing continuous ``eta0``."""
    inner = eta.times[(eta.times > 0) & (eta.times < upper)]
    points = np.r_[0.0, inner, upper]
    left, right = points[:-1], points[1:]
    vals = np.asarray(eta(left), dtype=float)
    return float(np.max(np.maximum(np.abs(vals - eta0(left)), np.abs(vals - eta0(right)))))


def uniform_l2_error(eta: StepFunction, a: float, b: float, slope: float = 1.0) -> float:
    """L2 distance to ``slope * t`` under the uniform law on ``[a, b]``, exact for step functions."""
    inner = eta.times[(eta.times > a) & (eta.times < b)]
    points = np.r_[a, inner, b]
    left, right = points[:-1], points[1:]
    v = np.asarray(eta(left), dtype=float) / slope
    sq = ((right - v) ** 3 - (left - v) ** 3) / 3.0 * slope**2
    return float(math.sqrt(sq.sum() / (b - a)))


def empirical_l2_error(f, f0, z) -> float:
    z = np.asarray(z, dtype=float)
    return float(math.sqrt(np.mean((f(z) - f0(z)) ** 2)))


def loglog_slope(ns, errors) -> tuple[float, float]:
    """OLS slope of ``log(error)`` on ``log(n)`` and its standard error."""
    x = np.log(np.asarray(ns, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    if x.size < 2:
        raise InvalidArgumentError("slope needs at least two points")
    xc = x - x.mean()
    slope = float(xc @ (y - y.mean()) / (xc @ xc))
    if x.size > 2:
        resid = y - y.mean() - slope * xc
        se = float(math.sqrt(resid @ resid / (x.size - 2) / (xc @ xc)))
    else:
        se = float("nan")
    return slope, se


def nuisance_error(cfg: ModelConfig, data, eta) -> float:
    if cfg.kind == COX_RC:
        return sup_norm_error(eta, cfg.eta0, float(np.quantile(data.y, 0.9)))
    if cfg.kind == COX_CS:
        return uniform_l2_error(eta, cfg.sigma, cfg.tau, cfg.eta0.slope)
    return empirical_l2_error(eta, f0_partly_linear, data.z)


def _rate_one(args):
    cfg, i, n, r = args
    model = build_model(cfg.model)
    data = generate_data(cfg.model, n, derive_seed(cfg.master_seed, _DATA, i, r))
    out = {"n": n, "r": r, "error": None, "error_boot": None}
    try:
        res = fit(model, data, None, cfg.fit)
        if res.converged:
            out["error"] = nuisance_error(cfg.model, data, res.eta_hat)
        w = draw_weights(cfg.weight_scheme, n, derive_seed(cfg.master_seed, _BOOT, i, r))
        res_b = fit(model, data, w, cfg.fit)
        if res_b.converged:
            out["error_boot"] = nuisance_error(cfg.model, data, res_b.eta_hat)
    except SemibootError as exc:
        out["failure"] = str(exc)
    return out


def rate_experiment(cfg: ExperimentConfig, error_fn=None) -> SimulationReport:
    """Log-log regression of the median nuisance error on ``n``.

    ``error_fn(n, r, bootstrap) -> float`` replaces fitting.
    """
    grid = cfg.n_grid
    if grid is None or len(grid) < 4 or grid[-1] < 10 * grid[0]:
        raise InvalidArgumentError("rate experiment needs an n_grid of >= 4 points spanning >= one decade")

    def run():
        if error_fn is None:
            items = [(cfg, i, n, r) for i, n in enumerate(grid) for r in range(cfg.R)]
            recs = _map(_rate_one, items, cfg.jobs)
        else:
            recs = [
                {"n": n, "r": r, "error": error_fn(n, r, False), "error_boot": error_fn(n, r, True)}
                for n in grid for r in range(cfg.R)
            ]
        summary = {"n_grid": list(grid), "R": cfg.R}
        for key in ("error", "error_boot"):
            med, fails = [], []
            for n in grid:
                vals = [rec[key] for rec in recs if rec["n"] == n and rec[key] is not None]
                fails.append(sum(1 for rec in recs if rec["n"] == n and rec[key] is None))
                med.append(float(np.median(vals)) if vals else float("nan"))
            slope, se = loglog_slope(grid, med)
            label = "estimate" if key == "error" else "bootstrap"
            summary[label] = {"median_error": med, "slope": slope, "slope_se": se, "failures": fails}
        return summary, recs

    return _timed("rates", cfg, run)


# ---------------------------------------------------------------------------
# expansion remainder


def expansion_remainder(estimate, center, scores, sigma, n: int, weights=None) -> np.ndarray:
    """``sqrt(n)(estimate - center) - sigma @ G`` with ``G`` the scaled score sum.

    ``G = sqrt(n) * mean(scores)``, or ``sqrt(n) * mean((w - 1) * scores)``
    for the bootstrap version; ``-sigma`` is the inverse of ``A = -sigma^{-1}``.
    """
    scores = np.asarray(scores, dtype=float).reshape(n, -1)
    mult = 1.0 if weights is None else (np.asarray(weights, dtype=float) - 1.0)[:, None]
    g = math.sqrt(n) * np.mean(mult * scores, axis=0)
    sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
    diff = np.atleast_1d(np.asarray(estimate, dtype=float) - np.asarray(center, dtype=float))
    return math.sqrt(n) * diff - sigma @ g


def _expansion_one(args):
    cfg, i, n, r = args
    model = build_model(cfg.model)
    data = generate_data(cfg.model, n, derive_seed(cfg.master_seed, _DATA, i, r))
    theta0 = np.asarray(cfg.model.theta0)
    out = {"n": n, "r": r, "remainder": None, "remainder_boot": None}
    try:
        res = fit(model, data, None, cfg.fit)
        if not res.converged:
            return out
        sigma = profile_curvature(model, data, res.theta_hat).matrix
        scores = efficient_score_cox_rc(theta0, LinearHazard(cfg.model.eta0.slope), data)
        rem = expansion_remainder(res.theta_hat, theta0, scores, sigma, n)
        out["remainder"] = float(np.linalg.norm(rem))
        w = draw_weights(cfg.weight_scheme, n, derive_seed(cfg.master_seed, _BOOT, i, r))
        res_b = fit(model, data, w, cfg.fit)
        if res_b.converged:
            rem_b = expansion_remainder(res_b.theta_hat, res.theta_hat, scores, sigma, n, weights=w)
            out["remainder_boot"] = float(np.linalg.norm(rem_b))
    except SemibootError as exc:
        out["failure"] = str(exc)
    return out


def expansion_check(cfg: ExperimentConfig) -> SimulationReport:
    """Median size of the expansion remainder across an ``n`` grid (right-censored Cox only)."""
    if cfg.model.kind != COX_RC:
        raise UnsupportedModelError("the expansion check needs the efficient score, shipped for cox-rc only")
    grid = cfg.n_grid
    if grid is None or len(grid) < 3:
        raise InvalidArgumentError("expansion check needs an n_grid of >= 3 points")
    scheme_constant(cfg.weight_scheme)

    def run():
        items = [(cfg, i, n, r) for i, n in enumerate(grid) for r in range(cfg.R)]
        recs = _map(_expansion_one, items, cfg.jobs)
        summary = {"n_grid": list(grid), "R": cfg.R}
        for key, label in (("remainder", "estimate"), ("remainder_boot", "bootstrap")):
            med, fails = [], []
            for n in grid:
                vals = [rec[key] for rec in recs if rec["n"] == n and rec[key] is not None]
                fails.append(sum(1 for rec in recs if rec["n"] == n and rec[key] is None))
                med.append(float(np.median(vals)) if vals else float("nan"))
            slope, se = loglog_slope(grid, med)
            summary[label] = {
                "median_abs_remainder": med,
                "strictly_decreasing": bool(all(b < a for a, b in zip(med, med[1:]))),
                "slope": slope,
                "slope_se": se,
                "failures": fails,
            }
        return summary, recs

    return _timed("expansion", cfg, run)


EXPERIMENTS = {
    "coverage": coverage_experiment,
    "consistency": consistency_experiment,
    "rates": rate_experiment,
    "expansion": expansion_check,
}


def run_experiment(name: str, cfg: ExperimentConfig) -> SimulationReport:
    try:
        fn = EXPERIMENTS[name]
    except KeyError:
        raise InvalidArgumentError(f"unknown experiment {name!r}; expected one of {sorted(EXPERIMENTS)}") from None
    return fn(cfg)
