"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

import numpy as np

from .exceptions import InputError


def check_matrix(X, name="X", allow_empty_columns=True):
    """Return ``X`` as a 2-D float array with finite entries."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InputError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] == 0:
        raise InputError(f"{name} has zero rows")
    if X.shape[1] == 0 and not allow_empty_columns:
        raise InputError(f"{name} has zero columns")
    if not np.all(np.isfinite(X)):
        raise InputError(f"{name} contains non-finite values")
    return X


def check_vector(v, n, name, default=None, finite=True):
    """Return ``v`` as a length-``n`` float vector (``default`` fills ``None``)."""
    if v is None:
        if default is None:
            raise InputError(f"{name} is required")
        return np.full(n, float(default))
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape[0] != n:
        raise InputError(f"{name} has length {v.shape[0]}, expected {n}")
    if finite and not np.all(np.isfinite(v)):
        raise InputError(f"{name} contains non-finite values")
    return v


def check_binary(y, n=None, name="y"):
    y = np.asarray(y, dtype=float).reshape(-1)
    if n is not None and y.shape[0] != n:
        raise InputError(f"{name} has length {y.shape[0]}, expected {n}")
    if not np.all((y == 0) | (y == 1)):
        raise InputError(f"{name} must contain only 0 and 1")
    return y


def check_weights(w, n):
    w = check_vector(w, n, "weights", default=1.0)
    if np.any(w < 0):
        raise InputError("weights must be nonnegative")
    return w


def check_finite_scalar(value, name):
    value = float(value)
    if not np.isfinite(value):
        raise InputError(f"{name} must be finite, got {value}")
    return value
