"""Bootstrap orchestration and bootstrap confidence sets.

Replicate ``b`` refits the model under weights drawn with seed
``derive_seed(master_seed, b)``; replicate results are collected by index,
so a run is reproducible whatever the worker count or scheduling order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .estimation import FitOptions, SigmaEstimate, fit, profile_curvature
from .exceptions import (
    InsufficientReplicatesError,
    InvalidArgumentError,
    SemibootError,
    UnstableBootstrapError,
)
from .weights import WeightScheme, derive_seed, draw_weights, scheme_constant

__all__ = [
    "BootstrapResult",
    "ConfidenceSet",
    "CI_KINDS",
    "run_bootstrap",
    "empirical_quantile",
    "percentile_ci",
    "hybrid_ci",
    "t_ci",
    "confidence_sets",
    "ks_distance",
    "normal_ks_distance",
]

logger = logging.getLogger(__name__)

CI_KINDS = ("percentile", "hybrid", "t")
MIN_CI_REPLICATES = 50
MAX_FAILURE_FRACTION = 0.05


@dataclass
class BootstrapResult:
    """Full-data estimate plus the matrix of converged bootstrap replicates."""

    theta_hat: np.ndarray
    replicates: np.ndarray
    c: float
    n: int
    B: int
    failures: int = 0
    scheme: str = ""
    replicate_sigma: np.ndarray | None = None
    failure_indices: list = field(default_factory=list)

    @property
    def d(self) -> int:
        return self.theta_hat.size

    def deviations(self) -> np.ndarray:
        """Rescaled deviations ``(sqrt(n)/c) (theta* - theta_hat)``."""
        return math.sqrt(self.n) / self.c * (self.replicates - self.theta_hat)


@dataclass(frozen=True)
class ConfidenceSet:
    kind: str
    level: float
    lower: np.ndarray
    upper: np.ndarray
    fallback: str | None = None

    def __post_init__(self):
        if not 0 < self.level < 1:
            raise InvalidArgumentError(f"confidence level must lie in (0, 1), got {self.level}")
        lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    def contains(self, theta) -> np.ndarray:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return (self.lower <= theta) & (theta <= self.upper)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "lower": self.lower.tolist(),
            "upper": self.upper.tolist(),
            "fallback": self.fallback,
        }


def _replicate(task):
    model, data, w, options, studentize = task
    try:
        res = fit(model, data, w, options)
    except SemibootError as exc:
        return None, None, f"{type(exc).__name__}: {exc}"
    if not res.converged:
        return None, None, f"not converged (|grad|={res.gradient_norm:.3g})"
    sigma = None
    if studentize == "per-replicate":
        try:
            sigma = profile_curvature(model, data, res.theta_hat, w).matrix
        except SemibootError:
            sigma = np.full((res.theta_hat.size,) * 2, np.nan)
    return res.theta_hat, sigma, None


def _run_tasks(tasks, jobs: int):
    if jobs <= 1 or len(tasks) < 2:
        return [_replicate(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_replicate, tasks, chunksize=chunk))


def run_bootstrap(
    model,
    data,
    scheme: WeightScheme,
    B: int,
    master_seed: int,
    options: FitOptions | None = None,
    *,
    jobs: int = 1,
    studentize: str | None = None,
    theta_hat=None,
    weights_fn=None,
) -> BootstrapResult:
    """Refit ``model`` under ``B`` exchangeable weight draws.

    ``studentize="per-replicate"`` also records each replicate's weighted
    curvature variance for :func:`t_ci`.  ``theta_hat`` skips the full-data
    fit when already known.  ``weights_fn(b, n)`` overrides the weight draws.
    Up to 5% non-converged replicates are dropped and counted; more raises
    :class:`UnstableBootstrapError`.
    """
    B = int(B)
    if B < 1:
        raise InvalidArgumentError(f"B must be >= 1, got {B}")
    if studentize not in (None, "shared", "per-replicate"):
        raise InvalidArgumentError(f"unknown studentize mode {studentize!r}")
    c = scheme_constant(scheme)
    n = data.n
    if theta_hat is None:
        base = fit(model, data, None, options)
        theta_hat = base.theta_hat
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))

    def weights(b):
        if weights_fn is not None:
            return np.asarray(weights_fn(b, n), dtype=float)
        return draw_weights(scheme, n, derive_seed(master_seed, b))

    tasks = [(model, data, weights(b), options, studentize) for b in range(B)]
    results = _run_tasks(tasks, jobs)

    failed = [b for b, r in enumerate(results) if r[0] is None]
    if len(failed) > MAX_FAILURE_FRACTION * B:
        diag = [f"replicate {b}: {results[b][2]}" for b in failed[:10]]
        raise UnstableBootstrapError(
            f"{len(failed)} of {B} bootstrap replicates failed (limit {MAX_FAILURE_FRACTION:.0%})",
            failures=len(failed),
            total=B,
            diagnostics=diag,
        )
    for b in failed:
        logger.info("bootstrap replicate %d dropped: %s", b, results[b][2])
    ok = [r for r in results if r[0] is not None]
    reps = np.array([r[0] for r in ok]).reshape(len(ok), theta_hat.size)
    rep_sigma = None
    if studentize == "per-replicate":
        rep_sigma = np.array([r[1] for r in ok]).reshape(len(ok), theta_hat.size, theta_hat.size)
    return BootstrapResult(
        theta_hat=theta_hat,
        replicates=reps,
        c=c,
        n=n,
        B=B,
        failures=len(failed),
        scheme=scheme.name,
        replicate_sigma=rep_sigma,
        failure_indices=failed,
    )


def empirical_quantile(samples, p: float) -> np.ndarray:
    """Componentwise quantile, linear interpolation at 1-based rank ``p(m-1)+1``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m = x.shape[0]
    if m < 1:
        raise InvalidArgumentError("empirical_quantile needs at least one sample")
    if not 0 <= p <= 1:
        raise InvalidArgumentError(f"p must lie in [0, 1], got {p}")
    xs = np.sort(x, axis=0)
    h = p * (m - 1)
    lo = int(math.floor(h))
    hi = min(lo + 1, m - 1)
    frac = h - lo
    return xs[lo] + frac * (xs[hi] - xs[lo])


def _check_replicates(boot: BootstrapResult) -> None:
    if boot.replicates.shape[0] < MIN_CI_REPLICATES:
        raise InsufficientReplicatesError(
            f"confidence sets need at least {MIN_CI_REPLICATES} replicates, have {boot.replicates.shape[0]}"
        )


def _check_alpha(alpha: float) -> None:
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")


def percentile_ci(boot: BootstrapResult, alpha: float = 0.05) -> ConfidenceSet:
    """``[theta + (tau_{a/2} - theta)/c, theta + (tau_{1-a/2} - theta)/c]`` componentwise."""
    _check_alpha(alpha)
    _check_replicates(boot)
    th, c = boot.theta_hat, boot.c
    lo = th + (empirical_quantile(boot.replicates, alpha / 2) - th) / c
    hi = th + (empirical_quantile(boot.replicates, 1 - alpha / 2) - th) / c
    return ConfidenceSet("percentile", 1 - alpha, lo, hi)


def hybrid_ci(boot: BootstrapResult, alpha: float = 0.05) -> ConfidenceSet:
    """Recentered interval from ``kappa_p = (sqrt(n)/c)(tau_p - theta)``."""
    _check_alpha(alpha)
    _check_replicates(boot)
    th, rn = boot.theta_hat, math.sqrt(boot.n)
    k_lo = rn / boot.c * (empirical_quantile(boot.replicates, alpha / 2) - th)
    k_hi = rn / boot.c * (empirical_quantile(boot.replicates, 1 - alpha / 2) - th)
    return ConfidenceSet("hybrid", 1 - alpha, th - k_hi / rn, th - k_lo / rn)


def t_ci(boot: BootstrapResult, sigma_hat: SigmaEstimate | None, sigma_star=None, alpha: float = 0.05) -> ConfidenceSet:
    """Studentized bootstrap interval.

    ``sigma_star`` is ``None`` (studentize every replicate by ``sigma_hat``)
    or an ``(m, d, d)`` array of per-replicate variance estimates.  Any
    missing or non-positive-definite variance falls back to
    :func:`hybrid_ci`, flagged in ``fallback``.
    """
    _check_alpha(alpha)
    _check_replicates(boot)
    m, d = boot.replicates.shape

    def _fallback(reason):
        logger.info("t interval falls back to hybrid: %s", reason)
        h = hybrid_ci(boot, alpha)
        return ConfidenceSet("t", h.level, h.lower, h.upper, fallback="hybrid")

    if sigma_hat is None or not sigma_hat.is_positive_definite():
        return _fallback("full-data variance unavailable or not positive definite")
    sd_hat = sigma_hat.std
    if sigma_star is None:
        sd_star = np.broadcast_to(sd_hat, (m, d))
    else:
        ss = np.asarray(sigma_star, dtype=float).reshape(m, d, d)
        if not np.all(np.isfinite(ss)):
            return _fallback("replicate variance unavailable")
        for s in ss:
            if np.any(np.linalg.eigvalsh(0.5 * (s + s.T)) <= 0):
                return _fallback("replicate variance not positive definite")
        sd_star = np.sqrt(np.diagonal(ss, axis1=1, axis2=2))
    rn = math.sqrt(boot.n)
    t_star = (rn / boot.c) * (boot.replicates - boot.theta_hat) / sd_star
    w_lo = empirical_quantile(t_star, alpha / 2)
    w_hi = empirical_quantile(t_star, 1 - alpha / 2)
    th = boot.theta_hat
    return ConfidenceSet("t", 1 - alpha, th - sd_hat * w_hi / rn, th - sd_hat * w_lo / rn)


def confidence_sets(boot: BootstrapResult, alpha: float, kinds=CI_KINDS, sigma_hat=None) -> dict:
    out = {}
    for kind in kinds:
        if kind == "percentile":
            out[kind] = percentile_ci(boot, alpha)
        elif kind == "hybrid":
            out[kind] = hybrid_ci(boot, alpha)
        elif kind == "t":
            out[kind] = t_ci(boot, sigma_hat, boot.replicate_sigma, alpha)
        else:
            raise InvalidArgumentError(f"unknown confidence set kind {kind!r}; expected {CI_KINDS}")
    return out


def ks_distance(a, b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic ``sup_x |F_a(x) - F_b(x)|``.

    Both empirical distribution functions are evaluated at every pooled
    sample point, which is where the supremum is attained.
    """
    a = np.sort(np.asarray(a, dtype=float).ravel())
    b = np.sort(np.asarray(b, dtype=float).ravel())
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("ks_distance needs two nonempty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def normal_ks_distance(sample, sd: float) -> float:
    """One-sample KS distance between ``sample`` and ``N(0, sd^2)``."""
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    if x.size == 0:
        raise InvalidArgumentError("normal_ks_distance needs a nonempty sample")
    if not sd > 0:
        raise InvalidArgumentError("sd must be positive")
    cdf = special.ndtr(x / sd)
    m = x.size
    upper = np.arange(1, m + 1) / m - cdf
    lower = cdf - np.arange(m) / m
    return float(max(upper.max(), lower.max()))
