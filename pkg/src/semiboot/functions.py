"""Nuisance function containers: cumulative hazards and regression splines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import InvalidArgumentError

__all__ = [
    "StepFunction",
    "LinearHazard",
    "SplineFunction",
    "SplineSettings",
    "bspline_basis",
    "uniform_knots",
]


@dataclass(frozen=True)
class StepFunction:
    """Nondecreasing right-continuous step function, zero before ``times[0]``."""

    times: np.ndarray
    cum: np.ndarray
    domain_end: float | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float).ravel()
        cum = np.asarray(self.cum, dtype=float).ravel()
        if times.shape != cum.shape:
            raise InvalidArgumentError("times and cum must have equal length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise InvalidArgumentError("step function times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "cum", cum)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.times.size == 0:
            out = np.zeros_like(t)
        else:
            idx = np.searchsorted(self.times, t, side="right") - 1
            out = np.where(idx >= 0, self.cum[np.maximum(idx, 0)], 0.0)
        return out if out.ndim else float(out)

    @property
    def jumps(self) -> np.ndarray:
        return np.diff(self.cum, prepend=0.0)

    def jump_at(self, t):
        t = np.asarray(t, dtype=float)
        if self.times.size == 0:
            out = np.zeros_like(t)
        else:
            idx = np.minimum(np.searchsorted(self.times, t), self.times.size - 1)
            out = np.where(self.times[idx] == t, self.jumps[idx], 0.0)
        return out if out.ndim else float(out)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.cum) >= 0) and (self.cum.size == 0 or self.cum[0] >= 0))

    def to_dict(self) -> dict:
        return {
            "type": "step",
            "times": self.times.tolist(),
            "cum": self.cum.tolist(),
            "jumps": self.jumps.tolist(),
            "domain_end": self.domain_end,
        }


@dataclass(frozen=True)
class LinearHazard:
    """Continuous cumulative hazard ``slope * t``; the simulation truth."""

    slope: float = 1.0

    def __call__(self, t):
        out = self.slope * np.asarray(t, dtype=float)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        return {"type": "linear", "slope": self.slope}


@dataclass(frozen=True)
class SplineSettings:
    """Regression-spline sieve.

    ``n_interior_knots=None`` picks ``ceil(n ** (1/5)) + 2`` uniform knots.
    ``enabled=False`` drops the nonparametric part (``f`` identically 0).
    """

    degree: int = 3
    n_interior_knots: int | None = None
    enabled: bool = True

    def knot_count(self, n: int) -> int:
        if self.n_interior_knots is not None:
            return int(self.n_interior_knots)
        return int(math.ceil(n ** 0.2)) + 2


def uniform_knots(count: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, count + 2)[1:-1]


def bspline_basis(z, interior_knots, degree: int = 3) -> np.ndarray:
    """Dense B-spline design matrix on ``[0, 1]``, one column per basis function."""
    z = np.clip(np.asarray(z, dtype=float).ravel(), 0.0, 1.0)
    t = np.concatenate([np.zeros(degree + 1), np.asarray(interior_knots, float), np.ones(degree + 1)])
    return BSpline.design_matrix(z, t, degree).toarray()


@dataclass(frozen=True)
class SplineFunction:
    """``f(z) = B(z) @ coefficients - centering_offset``."""

    degree: int
    interior_knots: np.ndarray
    coefficients: np.ndarray
    centering_offset: float = 0.0
    enabled: bool = field(default=True)

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        if not self.enabled:
            return np.zeros_like(z) if z.ndim else 0.0
        vals = bspline_basis(np.atleast_1d(z), self.interior_knots, self.degree) @ self.coefficients
        vals = vals - self.centering_offset
        return vals.reshape(z.shape) if z.ndim else float(vals[0])

    def to_dict(self) -> dict:
        return {
            "type": "spline",
            "degree": self.degree,
            "interior_knots": np.asarray(self.interior_knots).tolist(),
            "coefficients": np.asarray(self.coefficients).tolist(),
            "centering_offset": self.centering_offset,
            "enabled": self.enabled,
        }
