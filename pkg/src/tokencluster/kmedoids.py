"""KKZ seeding, k-medoids++ (alternate-and-snap) and plain k-means.

No randomness anywhere: every argmin/argmax breaks ties toward the lowest
index, which is what ``np.argmin``/``np.argmax`` already do.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import ValidationError, check_n_clusters, check_positive_int
from .distance import SQUARED_EUCLIDEAN, Metric, prepare

DEFAULT_MAX_ITERATIONS = 50


@dataclass(frozen=True)
class KMedoidsConfig:
    k: int
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    metric: Metric = SQUARED_EUCLIDEAN

    def __post_init__(self):
        check_positive_int(self.k, "k")
        check_positive_int(self.max_iterations, "max_iterations")


@dataclass
class PartitionOutcome:
    """Result of one partitioning run.

    ``centers`` always holds the K center vectors (in the metric's space);
    ``center_indices`` is set only when the centers are actual input points.
    ``cost_history[t]`` is the within-cluster sum of squares right after the
    t-th assignment step (index 0 is the assignment to the initial centers).
    """

    centers: np.ndarray
    labels: np.ndarray
    iterations_run: int
    final_cost: float
    center_indices: np.ndarray = None
    cost_history: list = field(default_factory=list)

    @property
    def center_positions(self):
        return self.center_indices if self.center_indices is not None else self.centers

    @property
    def k(self):
        return self.centers.shape[0]


def _kkz(X, k, D=None):
    sq_norms = np.einsum("ij,ij->i", X, X)
    first = int(np.argmax(sq_norms))
    chosen = [first]
    min_dist = (D[:, first] if D is not None else cdist(X, X[first : first + 1], "sqeuclidean")[:, 0]).copy()
    taken = np.zeros(X.shape[0], dtype=bool)
    taken[first] = True
    for _ in range(1, k):
        score = np.where(taken, -np.inf, min_dist)
        nxt = int(np.argmax(score))
        chosen.append(nxt)
        taken[nxt] = True
        col = D[:, nxt] if D is not None else cdist(X, X[nxt : nxt + 1], "sqeuclidean")[:, 0]
        np.minimum(min_dist, col, out=min_dist)
    return np.array(chosen, dtype=np.int64)


def kkz_init(points, k, metric=SQUARED_EUCLIDEAN):
    """Indices of K seed points chosen by KKZ.

    The first seed is the point with the largest l2 norm; each further seed
    is the not-yet-chosen point whose distance to its nearest chosen seed is
    largest.
    """
    X = prepare(points, metric)
    k = check_n_clusters(k, X.shape[0])
    return _kkz(X, k)


def _medoid_cost(D, medoids, labels):
    # fsum is order-independent, so equal multisets of terms give equal costs
    return math.fsum(D[np.arange(D.shape[0]), medoids[labels]])


def _assign_to_medoids(D, medoids):
    labels = np.argmin(D[:, medoids], axis=1)
    # a medoid always belongs to its own cluster, even when a duplicate point
    # with a lower cluster id sits at distance zero
    labels[medoids] = np.arange(medoids.shape[0])
    return labels


def _snap_medoids(X, labels, medoids):
    new = medoids.copy()
    for j in range(medoids.shape[0]):
        members = np.flatnonzero(labels == j)
        if members.size == 0:
            continue
        mean = X[members].mean(axis=0)
        d = cdist(X[members], mean[None], "sqeuclidean")[:, 0]
        new[j] = members[int(np.argmin(d))]
    return new


def kmedoids_pp(points, config):
    """k-medoids with KKZ seeding.

    Alternates (a) assigning every point to its nearest medoid and (b)
    replacing each medoid by the cluster member nearest to the cluster mean,
    until the labels stop changing or ``config.max_iterations`` updates have
    been made.
    """
    X = prepare(points, config.metric)
    k = check_n_clusters(config.k, X.shape[0])
    D = cdist(X, X, "sqeuclidean")
    medoids = _kkz(X, k, D)
    labels = _assign_to_medoids(D, medoids)
    history = [_medoid_cost(D, medoids, labels)]
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        medoids = _snap_medoids(X, labels, medoids)
        new_labels = _assign_to_medoids(D, medoids)
        history.append(_medoid_cost(D, medoids, new_labels))
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        if converged:
            break
    return PartitionOutcome(
        centers=X[medoids].copy(),
        labels=labels,
        iterations_run=iterations,
        final_cost=history[-1],
        center_indices=medoids,
        cost_history=history,
    )


def _mean_cost(X, centers, labels):
    diff = X - centers[labels]
    return math.fsum(np.einsum("ij,ij->i", diff, diff))


def _update_means(X, labels, centers):
    new = centers.copy()
    for j in range(centers.shape[0]):
        members = labels == j
        if members.any():
            new[j] = X[members].mean(axis=0)
    return new


def kmeans(points, config):
    """Lloyd's k-means seeded with KKZ; empty clusters keep their previous center."""
    X = prepare(points, config.metric)
    k = check_n_clusters(config.k, X.shape[0])
    centers = X[_kkz(X, k)].copy()
    labels = np.argmin(cdist(X, centers, "sqeuclidean"), axis=1)
    history = [_mean_cost(X, centers, labels)]
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        centers = _update_means(X, labels, centers)
        new_labels = np.argmin(cdist(X, centers, "sqeuclidean"), axis=1)
        history.append(_mean_cost(X, centers, new_labels))
        converged = np.array_equal(new_labels, labels)
        labels = new_labels
        if converged:
            break
    return PartitionOutcome(
        centers=centers,
        labels=labels,
        iterations_run=iterations,
        final_cost=history[-1],
        cost_history=history,
    )


def nearest_member(X, labels, centers):
    """Per cluster, the member closest to its center (lowest index on ties).

    Clusters left empty borrow a point from a cluster that has more than one
    member: among such non-center points, the one nearest the empty cluster's
    center is moved over.  Returns ``(indices, labels)``; ``labels`` is a copy
    reflecting any moves.
    """
    X = np.asarray(X, dtype=np.float64)
    labels = np.array(labels, copy=True)
    k = centers.shape[0]
    if k > X.shape[0]:
        raise ValidationError(f"k={k} exceeds the number of points m={X.shape[0]}")
    chosen = np.full(k, -1, dtype=np.int64)
    for j in range(k):
        members = np.flatnonzero(labels == j)
        if members.size:
            d = cdist(X[members], centers[j : j + 1], "sqeuclidean")[:, 0]
            chosen[j] = members[int(np.argmin(d))]
    for j in np.flatnonzero(chosen < 0):
        sizes = np.bincount(labels, minlength=k)
        movable = (sizes[labels] > 1) & ~np.isin(np.arange(X.shape[0]), chosen)
        cand = np.flatnonzero(movable)
        d = cdist(X[cand], centers[j : j + 1], "sqeuclidean")[:, 0]
        pick = cand[int(np.argmin(d))]
        labels[pick] = j
        chosen[j] = pick
    return chosen, labels
