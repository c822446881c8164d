"""Normalized spectral clustering over a KNN Gaussian similarity graph.

Pipeline: KNN graph -> L_sym = I - D^-1/2 W D^-1/2 -> K smallest
eigenvectors -> sign correction -> row normalisation -> KKZ k-means on the
rows.  Cluster centers are mapped back to real input points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from ._validation import (
    ValidationError,
    check_n_clusters,
    check_positive_float,
    check_positive_int,
)
from .distance import SQUARED_EUCLIDEAN, gaussian_kernel, prepare
from .kmedoids import KMedoidsConfig, PartitionOutcome, kmeans, nearest_member

DEFAULT_SIGMA = 2.0
NEIGHBORS_PER_FRAME = 5


def default_knn(frames_per_segment, m=None, extra=0):
    """Neighbour count: 5 per frame in the segment, plus ``extra`` (5 for 16-px patches).

    Capped at ``m - 1`` when the segment size is known.
    """
    knn = NEIGHBORS_PER_FRAME * frames_per_segment + extra
    if m is not None:
        knn = min(knn, m - 1)
    return knn


@dataclass(frozen=True)
class SpectralConfig:
    k: int
    knn: int
    sigma: float = DEFAULT_SIGMA
    kmeans: KMedoidsConfig = None
    metric: object = SQUARED_EUCLIDEAN

    def __post_init__(self):
        check_positive_int(self.k, "k")
        check_positive_int(self.knn, "knn")
        check_positive_float(self.sigma, "sigma")
        if self.kmeans is None:
            object.__setattr__(self, "kmeans", KMedoidsConfig(self.k))
        elif self.kmeans.k != self.k:
            raise ValidationError(f"embedding k-means uses k={self.kmeans.k}, expected {self.k}")


@dataclass
class SimilarityGraph:
    weights: np.ndarray
    degrees: np.ndarray = field(init=False)

    def __post_init__(self):
        self.degrees = self.weights.sum(axis=1)

    @property
    def adjacency(self):
        return self.weights > 0


@dataclass
class SpectralEmbedding:
    vectors: np.ndarray
    eigenvalues: np.ndarray
    raw_vectors: np.ndarray


def knn_sets(sq_dist, knn):
    """Boolean matrix: ``[i, j]`` is true iff j is one of i's ``knn`` nearest others."""
    m = sq_dist.shape[0]
    d = sq_dist.copy()
    np.fill_diagonal(d, np.inf)
    # stable sort keeps the lowest index first among equidistant neighbours
    order = np.argsort(d, axis=1, kind="stable")[:, :knn]
    nn = np.zeros((m, m), dtype=bool)
    nn[np.arange(m)[:, None], order] = True
    return nn


def build_knn_graph(points, knn, sigma=DEFAULT_SIGMA, metric=SQUARED_EUCLIDEAN):
    """Union-symmetrised KNN graph with Gaussian edge weights and no self-loops."""
    X = prepare(points, metric)
    m = X.shape[0]
    knn = check_positive_int(knn, "knn")
    if knn >= m:
        raise ValidationError(f"knn={knn} must be smaller than the number of points m={m}")
    sigma = check_positive_float(sigma, "sigma")
    sq = cdist(X, X, "sqeuclidean")
    nn = knn_sets(sq, knn)
    edges = nn | nn.T
    W = np.where(edges, gaussian_kernel(sq, sigma), 0.0)
    np.fill_diagonal(W, 0.0)
    return SimilarityGraph(W)


def normalized_laplacian(graph):
    W = np.asarray(graph.weights, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValidationError(f"weights must be square, got {W.shape}")
    deg = W.sum(axis=1)
    if np.any(deg <= 0):
        i = int(np.flatnonzero(deg <= 0)[0])
        raise ValidationError(f"vertex {i} has zero degree; L_sym is undefined")
    inv_sqrt = 1.0 / np.sqrt(deg)
    A = W * inv_sqrt[:, None] * inv_sqrt[None, :]
    A = (A + A.T) / 2.0  # exact symmetry: fp addition commutes
    L = -A
    np.fill_diagonal(L, 1.0)
    return L


def smallest_eigenvectors(L, k):
    """K eigenpairs of a symmetric matrix with the smallest eigenvalues, ascending."""
    L = np.asarray(L, dtype=np.float64)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise ValidationError(f"matrix must be square, got {L.shape}")
    if np.max(np.abs(L - L.T), initial=0.0) > 1e-10:
        raise ValidationError("matrix is not symmetric within 1e-10")
    k = check_n_clusters(k, L.shape[0])
    vals, vecs = np.linalg.eigh(L)
    return vecs[:, :k].copy(), vals[:k].copy()


def sign_statistics(L, U, eigenvalues):
    """Per-column majority-direction statistic s_k.

    For column k, project every column of ``L`` minus the other columns'
    rank-one parts onto ``u_k`` and sum the squared projections with their
    signs.
    """
    L = np.asarray(L, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    lam = np.asarray(eigenvalues, dtype=np.float64)
    m, K = U.shape
    if L.shape != (m, m) or lam.shape != (K,):
        raise ValidationError(f"shape mismatch: L {L.shape}, U {U.shape}, eigenvalues {lam.shape}")
    s = np.empty(K)
    for k in range(K):
        others = np.arange(K) != k
        Y = L - (U[:, others] * lam[others]) @ U[:, others].T
        proj = U[:, k] @ Y
        s[k] = np.sum(np.sign(proj) * proj * proj)
    return s


def sign_flip(L, U, eigenvalues):
    """Orient each eigenvector toward the majority of the data columns.

    A column whose statistic is exactly zero keeps its sign.
    """
    s = sign_statistics(L, U, eigenvalues)
    signs = np.where(s < 0, -1.0, 1.0)
    return np.asarray(U, dtype=np.float64) * signs


def row_normalize(U):
    norms = np.sqrt(np.einsum("ij,ij->i", U, U))
    out = np.zeros_like(U)
    nz = norms > 0
    out[nz] = U[nz] / norms[nz, None]
    return out


def spectral_embedding(points, config):
    graph = build_knn_graph(points, config.knn, config.sigma, config.metric)
    L = normalized_laplacian(graph)
    U, vals = smallest_eigenvectors(L, config.k)
    U = sign_flip(L, U, vals)
    return SpectralEmbedding(row_normalize(U), vals, U), graph


def spectral_cluster(points, config):
    """Cluster ``points`` spectrally and pick one real point per cluster.

    Each cluster's center is the member whose embedding row is nearest the
    cluster's mean row.  ``final_cost`` is measured in the input space,
    against those center points.
    """
    X = prepare(points, config.metric)
    m = X.shape[0]
    check_n_clusters(config.k, m)
    if config.k == m:
        # forced partition; also the only option when m == 1 and no graph exists
        idx = np.arange(m, dtype=np.int64)
        return PartitionOutcome(X.copy(), idx.copy(), 0, 0.0, center_indices=idx, cost_history=[0.0])
    if config.knn >= m:
        raise ValidationError(f"knn={config.knn} must be smaller than the number of points m={m}")
    emb, _ = spectral_embedding(X, config)
    part = kmeans(emb.vectors, config.kmeans)
    centers, labels = nearest_member(emb.vectors, part.labels, part.centers)
    diff = X - X[centers][labels]
    cost = float(np.einsum("ij,ij->", diff, diff))
    out = PartitionOutcome(
        centers=X[centers].copy(),
        labels=labels,
        iterations_run=part.iterations_run,
        final_cost=cost,
        center_indices=centers,
        cost_history=part.cost_history,
    )
    out.embedding = emb
    return out
