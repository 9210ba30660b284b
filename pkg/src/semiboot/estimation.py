"""Weighted M-estimation engine.

:func:`fit` maximizes a model's profiled criterion over a box in ``theta``
with a projected BFGS ascent driven by central-difference gradients.
:func:`profile_curvature` turns the curvature of the profiled criterion at
the maximizer into a variance estimate.

A *model* is any object exposing ``profiler(data, w)`` (and optionally
``curvature_profiler(data, w)``); a profiler has ``criterion(theta)`` and
``nuisance(theta)``, plus ``closed_form()`` when the maximizer is explicit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .exceptions import CurvatureError, InvalidArgumentError
from .weights import derive_seed

__all__ = ["FitOptions", "FitResult", "SigmaEstimate", "fit", "profile_curvature", "numeric_hessian"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FitOptions:
    """Optimizer settings.

    ``starts`` adds that many uniform random starts (seeded by ``seed``) to
    the single start at the box center; the best maximizer wins.
    """

    lower: float | tuple = -5.0
    upper: float | tuple = 5.0
    tol: float = 1e-6
    max_iter: int = 200
    starts: int = 0
    seed: int = 0
    grad_step: float = 1e-5

    def __post_init__(self):
        if self.max_iter < 1 or self.tol <= 0 or self.starts < 0 or self.grad_step <= 0:
            raise InvalidArgumentError("invalid optimizer options")

    def box(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (d,)).copy()
        hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (d,)).copy()
        if np.any(lo >= hi):
            raise InvalidArgumentError(f"empty theta box [{self.lower}, {self.upper}]")
        return lo, hi

    def to_dict(self) -> dict:
        return {
            "lower": self.lower if np.isscalar(self.lower) else list(self.lower),
            "upper": self.upper if np.isscalar(self.upper) else list(self.upper),
            "tol": self.tol,
            "max_iter": self.max_iter,
            "starts": self.starts,
            "seed": self.seed,
            "grad_step": self.grad_step,
        }

    @classmethod
    def from_dict(cls, d: dict | None) -> "FitOptions":
        d = dict(d or {})
        for key in ("lower", "upper"):
            if isinstance(d.get(key), list):
                d[key] = tuple(d[key])
        return cls(**d)


@dataclass
class FitResult:
    theta_hat: np.ndarray
    eta_hat: Any
    criterion: float
    iterations: int
    converged: bool
    gradient_norm: float
    trace: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "theta_hat": self.theta_hat.tolist(),
            "criterion": self.criterion,
            "iterations": self.iterations,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "eta_hat": self.eta_hat.to_dict() if hasattr(self.eta_hat, "to_dict") else None,
        }


@dataclass(frozen=True)
class SigmaEstimate:
    matrix: np.ndarray
    method: str = "profile-curvature"

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        object.__setattr__(self, "matrix", m)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.matrix))

    def is_positive_definite(self) -> bool:
        m = self.matrix
        return bool(np.all(np.isfinite(m)) and np.allclose(m, m.T, atol=1e-10)
                    and np.all(np.linalg.eigvalsh(m) > 0))

    def to_dict(self) -> dict:
        return {"matrix": self.matrix.tolist(), "method": self.method}


def _gradient(f, x, step):
    g = np.empty_like(x)
    for j in range(x.size):
        h = step * (1.0 + abs(x[j]))
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def _projected_gradient(x, g, lo, hi):
    # ascent direction g; components pushing out of the box are dropped
    pg = g.copy()
    pg[(x <= lo) & (g < 0)] = 0.0
    pg[(x >= hi) & (g > 0)] = 0.0
    return pg


def _ascend(f, x0, lo, hi, opts: FitOptions):
    """Projected BFGS ascent from ``x0``.  Returns ``(x, fx, iters, converged, gnorm, trace)``."""
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    fx = f(x)
    g = _gradient(f, x, opts.grad_step)
    d = x.size
    hinv = np.eye(d) / max(1.0, float(np.linalg.norm(g)))
    scaled = False
    trace = [fx]
    for it in range(opts.max_iter + 1):
        pg = _projected_gradient(x, g, lo, hi)
        gnorm = float(np.linalg.norm(pg))
        if gnorm <= opts.tol * (1.0 + abs(fx)):
            return x, fx, it, True, gnorm, trace
        if it == opts.max_iter:
            break
        free = pg != 0
        p = np.zeros(d)
        p[free] = hinv[np.ix_(free, free)] @ g[free]
        if p @ g <= 0:
            hinv = np.eye(d) / max(1.0, gnorm)
            p = np.where(free, g, 0.0) / max(1.0, gnorm)
        accepted = False
        for attempt in range(2):
            t = 1.0
            for _ in range(60):
                x_new = np.clip(x + t * p, lo, hi)
                step = x_new - x
                if not np.any(step):
                    break
                f_new = f(x_new)
                if f_new >= fx + 1e-4 * float(g @ step):
                    accepted = True
                    break
                t *= 0.5
            if accepted or attempt:
                break
            # quasi-Newton direction failed; retry along the projected gradient
            hinv = np.eye(d) / max(1.0, gnorm)
            p = np.where(free, g, 0.0) / max(1.0, gnorm)
        if not accepted:
            # no ascent possible at numerical resolution
            return x, fx, it, False, gnorm, trace
        g_new = _gradient(f, x_new, opts.grad_step)
        s = x_new - x
        y = -(g_new - g)  # gradient change of the minimization problem
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                hinv = np.eye(d) * (sy / float(y @ y))
                scaled = True
            rho = 1.0 / sy
            v = np.eye(d) - rho * np.outer(s, y)
            hinv = v @ hinv @ v.T + rho * np.outer(s, s)
        x, fx, g = x_new, f_new, g_new
        trace.append(fx)
    return x, fx, opts.max_iter, False, gnorm, trace


def fit(model, data, w=None, options: FitOptions | None = None) -> FitResult:
    """Maximize the weighted profiled criterion of ``model`` on ``data``.

    ``w`` defaults to unit weights.  Models whose profiler has a
    ``closed_form`` skip iteration when the solution lies in the box.  A fit
    that hits the iteration cap is returned with ``converged=False``.
    """
    opts = options or FitOptions()
    prof = model.profiler(data, w)
    d = data.d
    lo, hi = opts.box(d)

    if hasattr(prof, "closed_form"):
        theta, eta, crit = prof.closed_form()
        if np.all(theta >= lo) and np.all(theta <= hi):
            g = _gradient(prof.criterion, theta, opts.grad_step)
            return FitResult(theta, eta, float(crit), 0, True, float(np.linalg.norm(g)), [float(crit)])

    starts = [0.5 * (lo + hi)]
    if opts.starts:
        rng = np.random.default_rng(derive_seed(opts.seed, 0x5EED))
        starts += list(rng.uniform(lo, hi, size=(opts.starts, d)))

    best = None
    for x0 in starts:
        res = _ascend(prof.criterion, x0, lo, hi, opts)
        if best is None or res[1] > best[1]:
            best = res
    x, fx, iters, converged, gnorm, trace = best
    if not converged:
        logger.debug("fit stopped without convergence: |grad|=%.3g after %d iterations", gnorm, iters)
    return FitResult(x, prof.nuisance(x), float(fx), int(iters), bool(converged), gnorm, trace)


def numeric_hessian(f, x, steps) -> np.ndarray:
    """Central second-difference Hessian with per-coordinate steps."""
    x = np.asarray(x, dtype=float)
    d = x.size
    steps = np.broadcast_to(np.asarray(steps, dtype=float), (d,))
    f0 = f(x)
    hess = np.empty((d, d))
    for j in range(d):
        ej = np.zeros(d)
        ej[j] = steps[j]
        hess[j, j] = (f(x + ej) - 2.0 * f0 + f(x - ej)) / steps[j] ** 2
        for k in range(j):
            ek = np.zeros(d)
            ek[k] = steps[k]
            val = (f(x + ej + ek) - f(x + ej - ek) - f(x - ej + ek) + f(x - ej - ek)) / (4.0 * steps[j] * steps[k])
            hess[j, k] = hess[k, j] = val
    return hess


def profile_curvature(model, data, theta_hat, w=None, step: float | None = None) -> SigmaEstimate:
    """Variance estimate ``(-H / n)^{-1}`` from the profiled criterion's Hessian ``H``.

    The default step is ``n^{-1/2} / 2`` in every coordinate.  With ``w``
    the bootstrap-weighted criterion is used (per-replicate studentization).
    Raises :class:`CurvatureError` unless ``-H`` is positive definite.
    """
    n = data.n
    make = getattr(model, "curvature_profiler", model.profiler)
    prof = make(data, w)
    h = 0.5 / np.sqrt(n) if step is None else float(step)
    hess = numeric_hessian(prof.criterion, np.atleast_1d(np.asarray(theta_hat, dtype=float)), h)
    info = -0.5 * (hess + hess.T) / n
    if not np.all(np.isfinite(info)):
        raise CurvatureError("non-finite profile curvature")
    eig = np.linalg.eigvalsh(info)
    if np.any(eig <= 0):
        raise CurvatureError(f"profiled criterion is not concave at theta_hat (eigenvalues {eig})")
    sigma = np.linalg.inv(info)
    return SigmaEstimate(0.5 * (sigma + sigma.T))


def with_box(options: FitOptions | None, lower, upper) -> FitOptions:
    return replace(options or FitOptions(), lower=lower, upper=upper)
