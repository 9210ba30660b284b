"""Exchangeable bootstrap weights.

A bootstrap replicate is realized as a weighted refit: observation ``i``
enters the criterion with weight ``w[i]``.  Every scheme here produces
nonnegative, exchangeable weights that sum to ``n``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError, NotABootstrapSchemeError

__all__ = [
    "SchemeKind",
    "WeightScheme",
    "EFRON",
    "BAYESIAN",
    "UNIT",
    "derive_seed",
    "draw_weights",
    "empirical_c_squared",
    "scheme_constant",
    "validate_weights",
]


class SchemeKind(str, enum.Enum):
    EFRON = "efron"
    BAYESIAN = "bayesian"
    UNIT = "unit"


@dataclass(frozen=True)
class WeightScheme:
    """A weight law together with its limiting weight-variance constant ``c``.

    ``c`` satisfies ``(1/n) sum (W_i - 1)^2 -> c^2``.  The unit scheme is a
    pass-through for unweighted fits and has no constant.
    """

    kind: SchemeKind
    c: float | None = None

    def __post_init__(self):
        kind = SchemeKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is SchemeKind.UNIT:
            if self.c is not None:
                raise InvalidArgumentError("the unit scheme carries no constant c")
        elif self.c is None or not self.c > 0:
            raise InvalidArgumentError(f"scheme {kind.value} needs c > 0, got {self.c!r}")

    @classmethod
    def from_name(cls, name: str) -> "WeightScheme":
        try:
            kind = SchemeKind(str(name).lower())
        except ValueError:
            raise InvalidArgumentError(
                f"unknown weight scheme {name!r}; expected one of "
                f"{[k.value for k in SchemeKind]}"
            ) from None
        return _SCHEMES[kind]

    @property
    def name(self) -> str:
        return self.kind.value


EFRON = WeightScheme(SchemeKind.EFRON, 1.0)
BAYESIAN = WeightScheme(SchemeKind.BAYESIAN, 1.0)
UNIT = WeightScheme(SchemeKind.UNIT)
_SCHEMES = {SchemeKind.EFRON: EFRON, SchemeKind.BAYESIAN: BAYESIAN, SchemeKind.UNIT: UNIT}


def derive_seed(master_seed: int, *keys: int) -> int:
    """Counter-based child seed: a pure function of ``(master_seed, keys)``.

    Replicate ``b`` of a run seeded with ``s`` always sees
    ``derive_seed(s, b)``, whatever order the replicates execute in.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def draw_weights(scheme: WeightScheme, n: int, seed: int) -> np.ndarray:
    """Draw one weight vector of length ``n``.

    Efron weights are multinomial counts (``n`` trials, cells ``1/n``);
    Bayesian weights are standard exponentials divided by their mean, i.e.
    ``n`` times a flat Dirichlet draw.
    """
    n = int(n)
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if scheme.kind is SchemeKind.UNIT:
        return np.ones(n)
    rng = np.random.default_rng(int(seed))
    if scheme.kind is SchemeKind.EFRON:
        return rng.multinomial(n, np.full(n, 1.0 / n)).astype(float)
    xi = rng.standard_exponential(n)
    w = xi / xi.mean()
    # absorb the last ulp of rounding so the sum is n to machine precision
    w *= n / w.sum()
    return w


def validate_weights(w, n: int | None = None) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise InvalidArgumentError("weights must be a nonempty 1-d array")
    if n is not None and w.size != n:
        raise InvalidArgumentError(f"expected {n} weights, got {w.size}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgumentError("weights must be finite and nonnegative")
    if abs(w.sum() - w.size) > 1e-9 * max(1.0, w.size):
        raise InvalidArgumentError(f"weights must sum to n={w.size}, got {w.sum()!r}")
    return w


def empirical_c_squared(w) -> float:
    w = np.asarray(w, dtype=float)
    return float(np.mean((w - 1.0) ** 2))


def scheme_constant(scheme: WeightScheme) -> float:
    if scheme.kind is SchemeKind.UNIT or scheme.c is None:
        raise NotABootstrapSchemeError(
            "unit weights have zero variance and are not a bootstrap scheme"
        )
    return float(scheme.c)
