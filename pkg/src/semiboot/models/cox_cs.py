"""Cox regression with current status data.

For fixed ``theta`` the cumulative hazard is profiled out by a bounded
monotone NPMLE, computed with the iterative convex minorant algorithm.
"""

from __future__ import annotations

import numpy as np
from scipy.optimize import isotonic_regression

from ..exceptions import InvalidArgumentError, IterationLimitError
from ..functions import StepFunction
from .data import COX_CS, CoxCSData

__all__ = ["cs_criterion", "cs_profile_nuisance", "kkt_residual", "CoxCSModel"]

KKT_TOL = 1e-6
MAX_ICM_ITER = 500


def _log1m_exp(x):
    # log(1 - exp(-x)) for x >= 0; -inf at 0
    with np.errstate(divide="ignore"):
        return np.log(-np.expm1(-x))


def cs_criterion(theta, eta, c, delta, z):
    """``d*log(1 - exp(-eta(c) e^{theta'z})) - (1 - d) e^{theta'z} eta(c)``.

    ``-inf`` when an event is recorded where ``eta(c) = 0``.
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    c = np.asarray(c, dtype=float)
    delta = np.asarray(delta)
    lin = (np.atleast_2d(np.asarray(z, dtype=float)).reshape(c.size, -1) @ theta).reshape(c.shape)
    cum = np.asarray(eta(c), dtype=float) * np.exp(lin)
    out = np.where(delta == 1, _log1m_exp(cum), -cum)
    return out if np.ndim(out) else float(out)


class _CurrentStatus:
    """Grouped layout: one free value per distinct examination time.

    Zero-weight observations are dropped; they do not touch the criterion.
    """

    def __init__(self, data: CoxCSData, w=None, bounds=(1e-8, None)):
        n = data.n
        w = np.ones(n) if w is None else np.asarray(w, dtype=float)
        if w.shape != (n,):
            raise InvalidArgumentError(f"expected {n} weights, got shape {w.shape}")
        lo, hi = bounds
        if hi is None or not 0 < lo < hi:
            raise InvalidArgumentError(f"need 0 < eps_floor < M, got {bounds}")
        self.lo, self.hi = float(lo), float(hi)
        keep = w > 0
        order = np.argsort(data.c[keep], kind="stable")
        c = data.c[keep][order]
        self.delta = data.delta[keep][order].astype(bool)
        self.z = data.z[keep][order]
        self.w = w[keep][order]
        self.times, self.group = np.unique(c, return_inverse=True)
        self.n_groups = self.times.size
        if self.n_groups == 0:
            raise InvalidArgumentError("no observation with positive weight")

    def _gsum(self, x):
        return np.bincount(self.group, weights=x, minlength=self.n_groups)

    def set_theta(self, theta):
        self.r = np.exp(self.z @ np.atleast_1d(theta))

    def value(self, v) -> float:
        lam = v[self.group] * self.r
        return float(np.sum(self.w * np.where(self.delta, _log1m_exp(lam), -lam)))

    def derivatives(self, v):
        """Group gradient, Fisher weight and observed curvature."""
        lam = v[self.group] * self.r
        em = np.exp(-lam)
        one_m = -np.expm1(-lam)
        odds = em / one_m  # 1 / (exp(lam) - 1)
        wr = self.w * self.r
        grad = self._gsum(wr * np.where(self.delta, odds, -1.0))
        fisher = self._gsum(wr * self.r * odds)
        curv = self._gsum(np.where(self.delta, wr * self.r * em / one_m**2, 0.0))
        return grad, fisher, curv

    def initial(self) -> np.ndarray:
        p = isotonic_regression(self._gsum(self.w * self.delta) / self._gsum(self.w),
                                weights=self._gsum(self.w)).x
        p = np.clip(p, 1e-3, 1 - 1e-3)
        rbar = self._gsum(self.w * self.r) / self._gsum(self.w)
        return np.clip(-np.log1p(-p) / rbar.mean(), self.lo, self.hi)

    def solve_blocks(self, v) -> np.ndarray:
        """Exact optimum of each run of equal values, each run moving as one level."""
        starts = np.flatnonzero(np.r_[True, np.diff(v) != 0])
        block = np.cumsum(np.r_[True, np.diff(v) != 0]) - 1
        nb = starts.size

        def block_grad(vals):
            g, _, h = self.derivatives(vals[block])
            return np.add.reduceat(g, starts), np.add.reduceat(h, starts)

        g_lo, _ = block_grad(np.full(nb, self.lo))
        g_hi, _ = block_grad(np.full(nb, self.hi))
        out = np.clip(v[starts], self.lo, self.hi)
        at_lo = g_lo <= 0
        at_hi = g_hi >= 0
        lo = np.full(nb, self.lo)
        hi = np.full(nb, self.hi)
        free = ~(at_lo | at_hi)
        out[at_lo] = self.lo
        out[at_hi & ~at_lo] = self.hi
        for _ in range(200):
            if not free.any():
                break
            g, h = block_grad(out)
            lo = np.where(free & (g > 0), out, lo)
            hi = np.where(free & (g <= 0), out, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = out + g / h
            bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
            step = np.where(bad, 0.5 * (lo + hi), newton)
            done = (np.abs(g) <= 1e-13 * (1.0 + np.abs(h) * out)) | (hi - lo <= 1e-15 * hi)
            free &= ~done
            out = np.where(free, step, out)
        return out[block]

    def kkt(self, v) -> float:
        """Largest violation of the level-set optimality conditions.

        Within each run of equal values, moving a leading part down (when
        above the floor) or a trailing part up (when below ``M``) must not
        increase the criterion to first order.
        """
        g, _, _ = self.derivatives(v)
        worst = 0.0
        starts = np.flatnonzero(np.r_[True, np.diff(v) != 0])
        ends = np.r_[starts[1:], v.size]
        cs = np.r_[0.0, np.cumsum(g)]
        for s, e in zip(starts, ends):
            prefix = cs[s + 1 : e + 1] - cs[s]
            total = prefix[-1]
            if v[s] > self.lo:
                worst = max(worst, float(np.max(-prefix)))
            if v[s] < self.hi:
                worst = max(worst, float(np.max(total - np.r_[0.0, prefix[:-1]])))
        return worst

    def solve(self, init=None, tol: float = KKT_TOL, max_iter: int = MAX_ICM_ITER):
        v = self.initial() if init is None else np.clip(np.maximum.accumulate(init), self.lo, self.hi)
        f = self.value(v)
        residual = self.kkt(v)
        it = 0
        while residual > tol:
            if it >= max_iter:
                raise IterationLimitError(
                    f"current-status NPMLE did not converge in {max_iter} iterations "
                    f"(KKT residual {residual:.3g})",
                    last_iterate=StepFunction(self.times, v),
                    residual=residual,
                )
            it += 1
            g, fisher, _ = self.derivatives(v)
            target = v + g / fisher
            proj = np.clip(isotonic_regression(target, weights=fisher).x, self.lo, self.hi)
            d = proj - v
            slope = float(g @ d)
            cand, f_cand = v, f
            if slope > 0:
                step = 1.0
                for _ in range(40):
                    trial = np.clip(v + step * d, self.lo, self.hi)
                    f_trial = self.value(trial)
                    if f_trial >= f + 1e-4 * step * slope:
                        cand, f_cand = trial, f_trial
                        break
                    step *= 0.5
            polished = self.solve_blocks(proj)
            if np.all(np.diff(polished) >= 0):
                f_pol = self.value(polished)
                if f_pol >= f_cand:
                    cand, f_cand = polished, f_pol
            if f_cand < f or (cand is v):
                # no ascent from either move: fall back to polishing the current levels
                cand = self.solve_blocks(v)
                f_cand = self.value(cand)
                if not np.all(np.diff(cand) >= 0) or f_cand < f:
                    cand, f_cand = v, f
            v, f = cand, f_cand
            residual = self.kkt(v)
        self.iterations = it
        self.residual = residual
        return v, f


def cs_profile_nuisance(theta, data: CoxCSData, w=None, bounds=(1e-8, 4.0), init=None) -> StepFunction:
    """Weighted bounded monotone NPMLE of the cumulative hazard at fixed ``theta``.

    Values live at the sorted distinct examination times carrying positive
    weight, inside ``[eps_floor, M]``.  Raises :class:`IterationLimitError`
    (carrying the last iterate and its KKT residual) if the iteration cap is
    reached.
    """
    cs = _CurrentStatus(data, w, bounds)
    cs.set_theta(theta)
    v, _ = cs.solve(None if init is None else np.asarray(init(cs.times), dtype=float))
    return StepFunction(cs.times, v)


def kkt_residual(theta, data: CoxCSData, eta: StepFunction, w=None, bounds=(1e-8, 4.0)) -> float:
    cs = _CurrentStatus(data, w, bounds)
    cs.set_theta(theta)
    return cs.kkt(np.asarray(eta(cs.times), dtype=float))


class _Profiler:
    def __init__(self, data, w, bounds):
        self.cs = _CurrentStatus(data, w, bounds)
        self._warm = None

    def _solve(self, theta):
        self.cs.set_theta(np.asarray(theta, dtype=float))
        v, f = self.cs.solve(self._warm)
        self._warm = v
        return v, f

    def criterion(self, theta) -> float:
        return self._solve(theta)[1]

    def nuisance(self, theta) -> StepFunction:
        return StepFunction(self.cs.times, self._solve(theta)[0])


class CoxCSModel:
    """Cox model with current status data; nuisance values bounded in ``[eps_floor, M]``."""

    kind = COX_CS
    data_type = CoxCSData

    def __init__(self, eps_floor: float = 1e-8, M: float = 4.0):
        if not 0 < eps_floor < M:
            raise InvalidArgumentError("need 0 < eps_floor < M")
        self.eps_floor = float(eps_floor)
        self.M = float(M)

    def profiler(self, data: CoxCSData, w=None):
        return _Profiler(data, w, (self.eps_floor, self.M))

    curvature_profiler = profiler

    def to_dict(self) -> dict:
        return {"kind": self.kind, "eps_floor": self.eps_floor, "M": self.M}
