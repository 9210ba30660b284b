"""Datasets, simulation configs, data generators and CSV ingestion."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate, optimize

from ..exceptions import InvalidArgumentError, SchemaError
from ..functions import LinearHazard, SplineSettings

__all__ = [
    "COX_RC",
    "COX_CS",
    "PARTLY_LINEAR",
    "MODEL_KINDS",
    "CoxRCData",
    "CoxCSData",
    "PartlyLinearData",
    "ModelConfig",
    "event_probability",
    "censoring_rate_for_fraction",
    "generate_data",
    "read_csv",
    "write_csv",
]

COX_RC = "cox-rc"
COX_CS = "cox-cs"
PARTLY_LINEAR = "partly-linear"
MODEL_KINDS = (COX_RC, COX_CS, PARTLY_LINEAR)


def _covariates(z, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z.reshape(-1, 1)
    if z.ndim != 2 or z.shape[0] != n or z.shape[1] < 1:
        raise InvalidArgumentError(f"covariates must have shape (n={n}, d>=1), got {z.shape}")
    return z


def _indicator(delta, n: int) -> np.ndarray:
    delta = np.asarray(delta)
    if delta.shape != (n,):
        raise InvalidArgumentError(f"delta must have shape ({n},), got {delta.shape}")
    if not np.all((delta == 0) | (delta == 1)):
        raise InvalidArgumentError("delta entries must be 0 or 1")
    return delta.astype(np.int8)


def _finite(name: str, a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise InvalidArgumentError(f"{name} contains non-finite values")


def _freeze(*arrays: np.ndarray) -> None:
    for a in arrays:
        a.setflags(write=False)


@dataclass(frozen=True)
class CoxRCData:
    """Right-censored survival data ``(y, delta, z)``."""

    y: np.ndarray
    delta: np.ndarray
    z: np.ndarray
    kind = COX_RC

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        n = y.size
        if n < 1:
            raise InvalidArgumentError("dataset is empty")
        if np.any(y < 0):
            raise InvalidArgumentError("event/censoring times must be >= 0")
        delta, z = _indicator(self.delta, n), _covariates(self.z, n).copy()
        _finite("y", y)
        _finite("z", z)
        _freeze(y, delta, z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def take(self, idx) -> "CoxRCData":
        return CoxRCData(self.y[idx], self.delta[idx], self.z[idx])

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"y": self.y, "delta": self.delta}
        cols.update({f"z{j + 1}": self.z[:, j] for j in range(self.d)})
        return cols


@dataclass(frozen=True)
class CoxCSData:
    """Current status data ``(c, delta, z)``: examination time and event indicator."""

    c: np.ndarray
    delta: np.ndarray
    z: np.ndarray
    kind = COX_CS

    def __post_init__(self):
        c = np.array(self.c, dtype=float).ravel()
        n = c.size
        if n < 1:
            raise InvalidArgumentError("dataset is empty")
        if np.any(c < 0):
            raise InvalidArgumentError("examination times must be >= 0")
        delta, z = _indicator(self.delta, n), _covariates(self.z, n).copy()
        _finite("c", c)
        _finite("z", z)
        _freeze(c, delta, z)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.c.size

    @property
    def d(self) -> int:
        return self.z.shape[1]

    def take(self, idx) -> "CoxCSData":
        return CoxCSData(self.c[idx], self.delta[idx], self.z[idx])

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"c": self.c, "delta": self.delta}
        cols.update({f"z{j + 1}": self.z[:, j] for j in range(self.d)})
        return cols


@dataclass(frozen=True)
class PartlyLinearData:
    """``y = theta * w + f(z) + noise`` with ``w, z`` in ``[0, 1]``."""

    y: np.ndarray
    w: np.ndarray
    z: np.ndarray
    kind = PARTLY_LINEAR

    def __post_init__(self):
        y = np.array(self.y, dtype=float).ravel()
        n = y.size
        if n < 1:
            raise InvalidArgumentError("dataset is empty")
        w = np.array(self.w, dtype=float).ravel()
        z = np.array(self.z, dtype=float).ravel()
        if w.size != n or z.size != n:
            raise InvalidArgumentError("y, w and z must have equal length")
        for name, a in (("y", y), ("w", w), ("z", z)):
            _finite(name, a)
        if np.any((w < 0) | (w > 1)) or np.any((z < 0) | (z > 1)):
            raise InvalidArgumentError("w and z must lie in [0, 1]")
        _freeze(y, w, z)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "z", z)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def d(self) -> int:
        return 1

    def take(self, idx) -> "PartlyLinearData":
        return PartlyLinearData(self.y[idx], self.w[idx], self.z[idx])

    def columns(self) -> dict[str, np.ndarray]:
        return {"y": self.y, "w": self.w, "z": self.z}


_DATA_TYPES = {COX_RC: CoxRCData, COX_CS: CoxCSData, PARTLY_LINEAR: PartlyLinearData}


def f0_partly_linear(z):
    """True regression function: ``sin(2 pi z)``, which already has mean 0 on U[0, 1]."""
    return np.sin(2.0 * np.pi * np.asarray(z, dtype=float))


@dataclass(frozen=True)
class ModelConfig:
    """Model kind, truth and nuisance-space settings for one simulation setting.

    ``censoring_rate`` is the exponential censoring rate for right-censored
    data (0 switches censoring off); ``censoring_fraction``, when given,
    overrides it with the rate that censors that fraction on average.
    ``sigma, tau`` bound the uniform examination law for current status data.
    """

    kind: str = COX_RC
    theta0: tuple[float, ...] = (0.5,)
    censoring_rate: float = 0.5
    censoring_fraction: float | None = None
    sigma: float = 0.1
    tau: float = 2.0
    M: float | None = None
    eps_floor: float = 1e-8
    spline: SplineSettings = field(default_factory=SplineSettings)

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise InvalidArgumentError(f"unknown model kind {self.kind!r}; expected one of {MODEL_KINDS}")
        theta0 = tuple(float(t) for t in np.atleast_1d(self.theta0))
        if not theta0 or not all(math.isfinite(t) for t in theta0):
            raise InvalidArgumentError("theta0 must be a nonempty finite vector")
        if self.kind == PARTLY_LINEAR and len(theta0) != 1:
            raise InvalidArgumentError("the partly linear model has a scalar theta")
        object.__setattr__(self, "theta0", theta0)
        if isinstance(self.spline, dict):
            object.__setattr__(self, "spline", SplineSettings(**self.spline))
        if not self.censoring_rate >= 0:
            raise InvalidArgumentError("censoring_rate must be >= 0")
        if self.censoring_fraction is not None and not 0 <= self.censoring_fraction < 1:
            raise InvalidArgumentError("censoring_fraction must lie in [0, 1)")
        if not 0 < self.sigma < self.tau:
            raise InvalidArgumentError("examination window needs 0 < sigma < tau")
        if not 0 < self.eps_floor:
            raise InvalidArgumentError("eps_floor must be positive")
        if self.M is not None:
            if not self.M > self.eps_floor:
                raise InvalidArgumentError("M must exceed eps_floor")
            if self.kind == COX_CS and not self.M > self.eta0(self.tau):
                raise InvalidArgumentError("M must exceed the true cumulative hazard at tau")

    @property
    def d(self) -> int:
        return len(self.theta0)

    @property
    def eta0(self) -> LinearHazard:
        return LinearHazard(1.0)

    @property
    def bound_M(self) -> float:
        # twice the supremum of the true hazard over the examination window
        return float(self.M) if self.M is not None else 2.0 * self.eta0(self.tau)

    def effective_censoring_rate(self) -> float:
        if self.censoring_fraction is None:
            return float(self.censoring_rate)
        return censoring_rate_for_fraction(self.theta0, self.censoring_fraction)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["theta0"] = list(self.theta0)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "spline" in d and isinstance(d["spline"], dict):
            d["spline"] = SplineSettings(**d["spline"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidArgumentError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)

    def with_kind(self, kind: str) -> "ModelConfig":
        return replace(self, kind=kind)


def event_probability(theta0, censoring_rate: float) -> float:
    """P(T <= C) for exponential censoring, integrating over Z ~ U[0,1]^d.

    Given Z the event hazard is ``r = exp(theta0' Z)`` and
    ``P(T <= C | Z) = r / (r + censoring_rate)``.
    """
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if censoring_rate == 0:
        return 1.0

    def integrand(*z):
        r = math.exp(float(np.dot(theta0, z)))
        return r / (r + censoring_rate)

    val, _ = integrate.nquad(integrand, [(0.0, 1.0)] * theta0.size)
    return float(val)


def censoring_rate_for_fraction(theta0, fraction: float) -> float:
    if fraction == 0:
        return 0.0
    return float(
        optimize.brentq(lambda lam: 1.0 - event_probability(theta0, lam) - fraction, 1e-12, 1e6, xtol=1e-14)
    )


def generate_data(config: ModelConfig, n: int, seed: int):
    """Simulate ``n`` observations from the configured model, deterministic in ``seed``."""
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(int(seed))
    theta0 = np.asarray(config.theta0)
    if config.kind == PARTLY_LINEAR:
        w = rng.uniform(size=n)
        z = rng.uniform(size=n)
        y = theta0[0] * w + f0_partly_linear(z) + rng.standard_normal(n)
        return PartlyLinearData(y, w, z)

    z = rng.uniform(size=(n, config.d))
    # eta0(t) = t, so T | Z ~ Exponential(rate exp(theta0' Z))
    t = rng.standard_exponential(n) / np.exp(z @ theta0)
    if config.kind == COX_RC:
        rate = config.effective_censoring_rate()
        c = rng.standard_exponential(n) / rate if rate > 0 else np.full(n, np.inf)
        return CoxRCData(np.minimum(t, c), (t <= c).astype(np.int8), z)
    c = rng.uniform(config.sigma, config.tau, size=n)
    return CoxCSData(c, (t <= c).astype(np.int8), z)


def _schema(kind: str, d: int | None) -> list[str]:
    if kind == PARTLY_LINEAR:
        return ["y", "w", "z"]
    first = "y" if kind == COX_RC else "c"
    return [first, "delta"] + [f"z{j + 1}" for j in range(d or 0)]


def read_csv(path, kind: str):
    """Load one dataset from a headed CSV file.

    Cox files carry ``y|c, delta, z1..zd``; partly linear files ``y, w, z``.
    Raises :class:`SchemaError` naming missing or unexpected columns.
    """
    if kind not in MODEL_KINDS:
        raise InvalidArgumentError(f"unknown model kind {kind!r}")
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        rows = [row for row in reader if row and any(cell.strip() for cell in row)]

    if kind == PARTLY_LINEAR:
        expected = _schema(kind, None)
    else:
        zcols = [h for h in header if h.startswith("z") and h[1:].isdigit()]
        expected = _schema(kind, len(zcols))
        if not zcols:
            expected = expected + ["z1"]
    missing = [c for c in expected if c not in header]
    extra = [c for c in header if c not in expected]
    if missing or extra:
        raise SchemaError(
            f"{path}: column mismatch for model {kind}: missing={missing} unexpected={extra} "
            f"(expected {expected})"
        )
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    cols = {name: header.index(name) for name in expected}
    values = np.empty((len(rows), len(expected)))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
        for j, name in enumerate(expected):
            try:
                values[i, j] = float(row[cols[name]])
            except ValueError:
                raise SchemaError(f"{path}: row {i + 2}, column {name!r}: not a number: {row[cols[name]]!r}") from None

    try:
        if kind == PARTLY_LINEAR:
            return PartlyLinearData(values[:, 0], values[:, 1], values[:, 2])
        return _DATA_TYPES[kind](values[:, 0], values[:, 1], values[:, 2:])
    except InvalidArgumentError as exc:
        raise SchemaError(f"{path}: {exc}") from None


def write_csv(data, path) -> None:
    cols = data.columns()
    names = list(cols)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(data.n):
            writer.writerow([repr(float(cols[c][i])) if c != "delta" else int(cols[c][i]) for c in names])
