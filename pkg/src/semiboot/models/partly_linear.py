"""Partly linear regression ``y = theta * w + f(z) + noise`` by weighted least squares.

``f`` lives in a fixed-dimension cubic regression-spline sieve, centered so
that its weighted empirical mean is zero.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import InvalidArgumentError, SingularDesignError
from ..functions import SplineFunction, SplineSettings, bspline_basis, uniform_knots
from .data import PARTLY_LINEAR, PartlyLinearData

__all__ = ["partly_linear_fit", "design_matrix", "PartlyLinearModel"]


class _Design:
    def __init__(self, data: PartlyLinearData, w, spline: SplineSettings):
        n = data.n
        self.w = np.ones(n) if w is None else np.asarray(w, dtype=float)
        if self.w.shape != (n,):
            raise InvalidArgumentError(f"expected {n} weights, got shape {self.w.shape}")
        self.spline = spline
        self.y, self.wcov = data.y, data.w
        if spline.enabled:
            self.knots = uniform_knots(spline.knot_count(n))
            basis = bspline_basis(data.z, self.knots, spline.degree)
            self.means = (self.w @ basis) / self.w.sum()
            # the centered columns sum to zero row-wise; drop the last one
            self.basis = (basis - self.means)[:, :-1]
        else:
            self.knots = np.empty(0)
            self.means = np.empty(0)
            self.basis = np.empty((n, 0))
        self.names = ["w"] + [f"basis_{k}" for k in range(self.basis.shape[1])]
        self.sw = np.sqrt(self.w)

    def full(self) -> np.ndarray:
        return np.column_stack([self.wcov, self.basis])

    def check_rank(self, x: np.ndarray) -> None:
        xs = x * self.sw[:, None]
        if xs.shape[1] == 0:
            return
        sv = np.linalg.svd(xs, compute_uv=False)
        tol = max(xs.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
        if sv.size < xs.shape[1] or sv[-1] <= tol:
            # locate the first column that adds nothing to the span of its predecessors
            for j in range(xs.shape[1]):
                if np.linalg.matrix_rank(xs[:, : j + 1]) < j + 1:
                    name = self.names[j]
                    raise SingularDesignError(f"weighted design is rank deficient at column {name!r}", name)
            raise SingularDesignError("weighted design is rank deficient")

    def spline_function(self, coef_centered) -> SplineFunction:
        if not self.spline.enabled:
            return SplineFunction(self.spline.degree, self.knots, np.empty(0), 0.0, enabled=False)
        coef = np.r_[coef_centered, 0.0]
        return SplineFunction(self.spline.degree, self.knots, coef, float(coef @ self.means))


def design_matrix(data: PartlyLinearData, w=None, spline: SplineSettings | None = None):
    """Return the stacked design ``[w, centered basis]`` and its column names."""
    des = _Design(data, w, spline or SplineSettings())
    return des.full(), list(des.names)


def partly_linear_fit(data: PartlyLinearData, w=None, spline: SplineSettings | None = None):
    """Joint weighted least-squares fit of ``(theta, f)``.

    Returns ``(theta, SplineFunction)``.  Raises :class:`SingularDesignError`
    naming the first column that makes the weighted design rank deficient.
    """
    des = _Design(data, w, spline or SplineSettings())
    x = des.full()
    des.check_rank(x)
    beta, *_ = np.linalg.lstsq(x * des.sw[:, None], data.y * des.sw, rcond=None)
    return np.array([beta[0]]), des.spline_function(beta[1:])


class _Profiler:
    """Criterion ``-sum_i w_i (y_i - theta w_i - f(z_i))^2`` with ``f`` profiled out.

    After projecting off the weighted spline span, the residual is affine in
    theta: ``a - theta * b``.
    """

    gaussian = False

    def __init__(self, data, w, spline):
        self.des = des = _Design(data, w, spline)
        des.check_rank(des.full())
        sw = des.sw
        if des.basis.shape[1]:
            self.q, _ = np.linalg.qr(des.basis * sw[:, None])
            proj = lambda v: v - self.q @ (self.q.T @ v)  # noqa: E731
        else:
            self.q = None
            proj = lambda v: v  # noqa: E731
        self.a = proj(data.y * sw)
        self.b = proj(des.wcov * sw)
        self.total = float(des.w.sum())

    def rss(self, theta) -> float:
        r = self.a - float(np.atleast_1d(theta)[0]) * self.b
        return float(r @ r)

    def criterion(self, theta) -> float:
        if self.gaussian:
            return -0.5 * self.total * np.log(self.rss(theta) / self.total)
        return -self.rss(theta)

    def nuisance(self, theta) -> SplineFunction:
        des = self.des
        if not des.basis.shape[1]:
            return des.spline_function(np.empty(0))
        resid = (des.y - float(np.atleast_1d(theta)[0]) * des.wcov) * des.sw
        coef, *_ = np.linalg.lstsq(des.basis * des.sw[:, None], resid, rcond=None)
        return des.spline_function(coef)

    def closed_form(self):
        bb = float(self.b @ self.b)
        if bb <= 0:
            raise SingularDesignError("covariate w lies in the spline span", "w")
        theta = np.array([float(self.a @ self.b) / bb])
        return theta, self.nuisance(theta), self.criterion(theta)


class _GaussianProfiler(_Profiler):
    gaussian = True


class PartlyLinearModel:
    """Least-squares partly linear model.

    Curvature uses the scale-profiled Gaussian log-likelihood
    ``-(N/2) log(RSS/N)``, whose observed information is ``sum b^2 / sigma^2``.
    """

    kind = PARTLY_LINEAR
    data_type = PartlyLinearData

    def __init__(self, spline: SplineSettings | None = None):
        self.spline = spline or SplineSettings()

    def profiler(self, data: PartlyLinearData, w=None):
        return _Profiler(data, w, self.spline)

    def curvature_profiler(self, data: PartlyLinearData, w=None):
        return _GaussianProfiler(data, w, self.spline)

    def to_dict(self) -> dict:
        s = self.spline
        return {"kind": self.kind, "spline": {"degree": s.degree, "n_interior_knots": s.n_interior_knots, "enabled": s.enabled}}
