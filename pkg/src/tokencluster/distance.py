"""Squared Euclidean distance and Gaussian similarity kernels.

Everything is evaluated in float64.  Pairwise matrices come from
:func:`scipy.spatial.distance.cdist`, which sums ``(x_i - y_i) ** 2`` in
component order, so ``d(x, y) == d(y, x)`` bit-for-bit and ``d(x, x) == 0``.
The scalar functions route through the same kernel so that scalar and
matrix results agree exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import ValidationError, check_points, check_positive_float, check_vector


@dataclass(frozen=True)
class Metric:
    kind: str = "squared_euclidean"
    pre_normalize: bool = False

    def __post_init__(self):
        if self.kind != "squared_euclidean":
            raise ValidationError(f"unsupported metric kind {self.kind!r}")


SQUARED_EUCLIDEAN = Metric()


def l2_normalize(X):
    """Row-wise unit normalisation; zero rows stay zero."""
    X = np.asarray(X, dtype=np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", X, X))
    out = np.zeros_like(X)
    nz = norms > 0
    out[nz] = X[nz] / norms[nz, None]
    return out


def prepare(X, metric=SQUARED_EUCLIDEAN):
    """Points as float64, normalised first if the metric asks for it."""
    X = check_points(X)
    return l2_normalize(X) if metric.pre_normalize else X


def pairwise_squared_distances(X, Y=None, metric=SQUARED_EUCLIDEAN):
    X = prepare(X, metric)
    Y = X if Y is None else prepare(Y, metric)
    if X.shape[1] != Y.shape[1]:
        raise ValidationError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    return cdist(X, Y, "sqeuclidean")


def squared_distance(x, y, metric=SQUARED_EUCLIDEAN):
    x, y = check_vector(x, "x"), check_vector(y, "y")
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch: {x.shape[0]} vs {y.shape[0]}")
    return float(pairwise_squared_distances(x[None], y[None], metric)[0, 0])


def gaussian_kernel(sq_dist, sigma):
    """``exp(-d / (2 sigma^2))`` applied elementwise to squared distances."""
    sigma = check_positive_float(sigma, "sigma")
    return np.exp(-np.asarray(sq_dist, dtype=np.float64) / (2.0 * sigma * sigma))


def gaussian_similarity(x, y, sigma, metric=SQUARED_EUCLIDEAN):
    sigma = check_positive_float(sigma, "sigma")
    return float(gaussian_kernel(squared_distance(x, y, metric), sigma))
