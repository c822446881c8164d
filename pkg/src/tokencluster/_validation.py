"""Input validation helpers shared by the estimators and free functions."""
from __future__ import annotations

import numbers

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a shape, range or finiteness contract."""


def check_points(X, name="X", dtype=np.float64):
    """Return ``X`` as a finite 2-D array of ``dtype``.

    A 1-D input is rejected rather than reshaped; clustering a single
    feature column by accident is a common silent bug.
    """
    X = np.asarray(X)
    if X.ndim != 2:
        raise ValidationError(f"{name} must be 2-D (n_points, dim), got shape {X.shape}")
    if X.shape[0] == 0:
        raise ValidationError(f"{name} is empty")
    if X.shape[1] == 0:
        raise ValidationError(f"{name} has zero-dimensional points")
    X = np.asarray(X, dtype=dtype)
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise ValidationError(f"{name} contains a non-finite value at index {tuple(int(i) for i in bad)}")
    return X


def check_vector(x, name="x"):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValidationError(f"{name} contains non-finite values")
    return x


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValidationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive_float(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise ValidationError(f"{name} must be a real number, got {value!r}")
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise ValidationError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_n_clusters(k, n_points):
    k = check_positive_int(k, "k")
    if k > n_points:
        raise ValidationError(f"k={k} exceeds the number of points m={n_points} (need k <= m)")
    return k
