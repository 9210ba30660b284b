"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, check_consistent_length

from .exceptions import InvalidArgumentError

__all__ = ["check_covariates", "check_event_target", "check_response", "check_sample_weight"]


def check_covariates(X, *, n_features: int | None = None) -> np.ndarray:
    """2-d finite float array; ``n_features`` pins the column count."""
    try:
        X = check_array(X, dtype=float, ensure_2d=True)
    except ValueError as exc:
        raise InvalidArgumentError(str(exc)) from None
    if n_features is not None and X.shape[1] != n_features:
        raise InvalidArgumentError(f"X has {X.shape[1]} features, expected {n_features}")
    return X


def check_event_target(y, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Split a ``(time, indicator)`` target into two arrays.

    Accepts an ``(n, 2)`` array, a pair of length-``n`` sequences, or a
    structured array with one time field and one indicator field.
    """
    if isinstance(y, tuple) and len(y) == 2:
        time, event = (np.asarray(v, dtype=float).ravel() for v in y)
    else:
        arr = np.asarray(y)
        if arr.dtype.names:
            # a boolean field is the indicator whatever its position (scikit-survival puts it first)
            first, second = arr.dtype.names[:2]
            if arr.dtype[first].kind == "b":
                first, second = second, first
            time, event = arr[first].astype(float), arr[second].astype(float)
        else:
            arr = np.asarray(arr, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != 2:
                raise InvalidArgumentError(f"y must have shape (n, 2) with columns (time, indicator), got {arr.shape}")
            time, event = arr[:, 0], arr[:, 1]
    try:
        check_consistent_length(time, event, np.empty(n))
    except ValueError as exc:
        raise InvalidArgumentError(str(exc)) from None
    return time, event


def check_response(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.size != n:
        raise InvalidArgumentError(f"y has {y.size} entries, expected {n}")
    if not np.all(np.isfinite(y)):
        raise InvalidArgumentError("y contains non-finite values")
    return y


def check_sample_weight(sample_weight, n: int) -> np.ndarray | None:
    """``None`` or a nonnegative finite weight vector of length ``n``.

    Weights are taken as given; they are not renormalized to sum to ``n``.
    """
    if sample_weight is None:
        return None
    w = np.asarray(sample_weight, dtype=float).ravel()
    if w.size != n:
        raise InvalidArgumentError(f"sample_weight has {w.size} entries, expected {n}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise InvalidArgumentError("sample_weight must be finite and nonnegative")
    if not w.sum() > 0:
        raise InvalidArgumentError("sample_weight must have positive total")
    return w
