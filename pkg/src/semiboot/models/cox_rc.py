"""Cox regression with right-censored data.

The cumulative hazard is profiled out in closed form by the weighted
Breslow estimator, leaving the weighted partial likelihood in ``theta``.
"""

from __future__ import annotations

import numpy as np

from ..exceptions import DegenerateRiskSetError, InvalidArgumentError
from ..functions import LinearHazard, StepFunction
from .data import COX_RC, CoxRCData

__all__ = [
    "cox_rc_criterion",
    "breslow_profile",
    "cox_rc_profile_criterion",
    "efficient_score_cox_rc",
    "CoxRCModel",
]


def cox_rc_criterion(theta, eta: StepFunction, y, delta, z):
    """Log-likelihood contribution ``d*theta'z - exp(theta'z)*eta(y) + d*log(eta{y})``.

    Vectorized over observations.  An event at a time where ``eta`` has no
    mass has log-likelihood ``-inf``, the invalid-support sentinel.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    y = np.asarray(y, dtype=float)
    delta = np.asarray(delta)
    lin = np.atleast_2d(np.asarray(z, dtype=float)).reshape(y.size, -1) @ theta
    lin = lin.reshape(y.shape)
    out = delta * lin - np.exp(lin) * eta(y)
    jump = np.asarray(eta.jump_at(y))
    with np.errstate(divide="ignore"):
        logjump = np.where(jump > 0, np.log(np.where(jump > 0, jump, 1.0)), -np.inf)
    out = np.where(delta == 1, out + logjump, out)
    return out if np.ndim(out) else float(out)


class _RiskSets:
    """Sorted layout of one dataset under one weight vector.

    Observations with zero weight stay in the layout; they contribute
    nothing to risk sums or event counts.
    """

    def __init__(self, data: CoxRCData, w=None):
        n = data.n
        w = np.ones(n) if w is None else np.asarray(w, dtype=float)
        if w.shape != (n,):
            raise InvalidArgumentError(f"expected {n} weights, got shape {w.shape}")
        order = np.argsort(data.y, kind="stable")
        self.y = data.y[order]
        self.delta = data.delta[order]
        self.z = data.z[order]
        self.w = w[order]
        # risk set of sorted position i starts at the first tie of y[i]
        self.first = np.searchsorted(self.y, self.y, side="left")
        self.events = (self.delta == 1) & (self.w > 0)
        if not np.any(self.events):
            raise DegenerateRiskSetError("no uncensored observation with positive weight")
        self.wdelta = np.where(self.events, self.w, 0.0)
        self.total_events = float(self.wdelta.sum())

    def log_risk(self, theta):
        lin = self.z @ theta
        shift = lin.max()
        e = self.w * np.exp(lin - shift)
        rsum = np.cumsum(e[::-1])[::-1][self.first]
        with np.errstate(divide="ignore"):
            return lin, np.log(rsum) + shift

    def criterion(self, theta) -> float:
        lin, log_s = self.log_risk(theta)
        ev = self.events
        return float(np.sum(self.w[ev] * (lin[ev] - log_s[ev])))

    def breslow(self, theta) -> StepFunction:
        _, log_s = self.log_risk(theta)
        ev = self.events
        times, start = np.unique(self.y[ev], return_index=True)
        counts = np.add.reduceat(self.wdelta[ev], start)
        log_risk_at = log_s[ev][start]
        if not np.all(np.isfinite(log_risk_at)):
            raise DegenerateRiskSetError("zero weighted at-risk sum at an event time")
        jumps = counts * np.exp(-log_risk_at)
        return StepFunction(times, np.cumsum(jumps), domain_end=float(self.y[-1]))


def breslow_profile(theta, data: CoxRCData, w=None) -> StepFunction:
    """Weighted Breslow maximizer of the likelihood over cumulative hazards.

    The jump at an uncensored time ``t`` is the weighted event count at ``t``
    over ``sum_j w_j 1{Y_j >= t} exp(theta' Z_j)``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return _RiskSets(data, w).breslow(theta)


def cox_rc_profile_criterion(theta, data: CoxRCData, w=None) -> float:
    """Weighted log partial likelihood.

    Equal, up to an additive constant free of ``theta``, to the weighted
    log-likelihood evaluated at :func:`breslow_profile`.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return _RiskSets(data, w).criterion(theta)


def _h_dagger(theta, data: CoxRCData, at):
    """Plug-in least favorable direction at times ``at``, shape ``(len(at), d)``."""
    order = np.argsort(data.y, kind="stable")
    ys, zs = data.y[order], data.z[order]
    lin = zs @ theta
    e = np.exp(lin - lin.max())
    den = np.cumsum(e[::-1])[::-1]
    num = np.cumsum((zs * e[:, None])[::-1], axis=0)[::-1]
    idx = np.searchsorted(ys, np.asarray(at, dtype=float), side="left")
    if np.any(idx >= ys.size):
        raise DegenerateRiskSetError("empty risk set beyond the largest observed time")
    return num[idx] / den[idx, None]


def efficient_score_cox_rc(theta, eta, data: CoxRCData) -> np.ndarray:
    """Per-observation efficient score, shape ``(n, d)``.

    ``eta`` is either a :class:`StepFunction` (the integral against ``d eta``
    is a sum over its jumps) or a :class:`LinearHazard` (the integral of the
    step-valued plug-in direction is evaluated exactly).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    y, delta, z = data.y, data.delta.astype(float), data.z
    risk = np.exp(z @ theta)
    h_y = _h_dagger(theta, data, y)

    if isinstance(eta, StepFunction):
        keep = eta.times <= y.max()
        t_k = eta.times[keep]
        if t_k.size:
            contrib = _h_dagger(theta, data, t_k) * eta.jumps[keep][:, None]
            running = np.cumsum(contrib, axis=0)
            pos = np.searchsorted(t_k, y, side="right") - 1
            integral = np.where(pos[:, None] >= 0, running[np.maximum(pos, 0)], 0.0)
        else:
            integral = np.zeros_like(z)
    elif isinstance(eta, LinearHazard):
        u = np.unique(y)
        widths = np.diff(u, prepend=0.0) * eta.slope
        running = np.cumsum(_h_dagger(theta, data, u) * widths[:, None], axis=0)
        integral = running[np.searchsorted(u, y)]
    else:
        raise InvalidArgumentError(f"unsupported nuisance type {type(eta).__name__}")

    eta_y = np.asarray(eta(y), dtype=float)
    first = delta[:, None] * z - z * (risk * eta_y)[:, None]
    second = delta[:, None] * h_y - risk[:, None] * integral
    return first - second


class _Profiler:
    def __init__(self, data, w):
        self.risk = _RiskSets(data, w)

    def criterion(self, theta) -> float:
        return self.risk.criterion(np.asarray(theta, dtype=float))

    def nuisance(self, theta) -> StepFunction:
        return self.risk.breslow(np.asarray(theta, dtype=float))


class CoxRCModel:
    """Cox model with right-censored data."""

    kind = COX_RC
    data_type = CoxRCData

    def profiler(self, data: CoxRCData, w=None):
        return _Profiler(data, w)

    curvature_profiler = profiler

    def to_dict(self) -> dict:
        return {"kind": self.kind}
