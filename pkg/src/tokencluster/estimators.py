"""scikit-learn compatible wrappers around the clustering routines."""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ValidationError, check_points
from .distance import Metric, prepare
from .embedding import TokenSequence, TokenSet
from .kmedoids import KMedoidsConfig, kmeans, kmedoids_pp
from .segmenter import ClusteringStage, cluster_segments
from .spectral import DEFAULT_SIGMA, SpectralConfig, spectral_cluster


class _CenterPredictMixin:
    def predict(self, X):
        """Index of the nearest fitted center for each row of ``X``."""
        check_is_fitted(self, "cluster_centers_")
        X = check_points(X)
        if X.shape[1] != self.n_features_in_:
            raise ValidationError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        metric = Metric(pre_normalize=self.normalize)
        return np.argmin(cdist(prepare(X, metric), prepare(self.cluster_centers_, metric), "sqeuclidean"), axis=1)


class KMedoidsPP(_CenterPredictMixin, ClusterMixin, BaseEstimator):
    """k-medoids with deterministic KKZ seeding.

    Parameters
    ----------
    n_clusters : int
    max_iter : int, default=50
        Cap on medoid updates.  The loop stops earlier once labels repeat.
    normalize : bool, default=False
        l2-normalise points before measuring distances.

    Attributes
    ----------
    medoid_indices_ : ndarray of shape (n_clusters,)
    cluster_centers_ : ndarray of shape (n_clusters, n_features)
        The medoid rows of the training data, as given (not normalised).
    labels_ : ndarray of shape (n_samples,)
    inertia_ : float
    n_iter_ : int
    """

    def __init__(self, n_clusters=8, max_iter=50, normalize=False):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.normalize = normalize

    def fit(self, X, y=None):
        X = check_points(X)
        out = kmedoids_pp(X, KMedoidsConfig(self.n_clusters, self.max_iter, Metric(pre_normalize=self.normalize)))
        self.n_features_in_ = X.shape[1]
        self.medoid_indices_ = out.center_indices
        self.cluster_centers_ = X[out.center_indices].copy()
        self.labels_ = out.labels
        self.inertia_ = out.final_cost
        self.n_iter_ = out.iterations_run
        return self


class KKZKMeans(_CenterPredictMixin, ClusterMixin, BaseEstimator):
    """Lloyd's k-means with KKZ seeding instead of random restarts."""

    def __init__(self, n_clusters=8, max_iter=50, normalize=False):
        self.n_clusters = n_clusters
        self.max_iter = max_iter
        self.normalize = normalize

    def fit(self, X, y=None):
        X = check_points(X)
        out = kmeans(X, KMedoidsConfig(self.n_clusters, self.max_iter, Metric(pre_normalize=self.normalize)))
        self.n_features_in_ = X.shape[1]
        self.cluster_centers_ = out.centers
        self.labels_ = out.labels
        self.inertia_ = out.final_cost
        self.n_iter_ = out.iterations_run
        return self


class SpectralTokenClustering(_CenterPredictMixin, ClusterMixin, BaseEstimator):
    """Normalized spectral clustering that reports one real point per cluster.

    ``n_neighbors=None`` uses ``min(5, n_samples - 1)`` neighbours, i.e. the
    per-frame rule for a single-frame segment.  ``predict`` assigns new
    points to the nearest center token in input space.
    """

    def __init__(self, n_clusters=8, n_neighbors=None, sigma=DEFAULT_SIGMA, max_iter=50, normalize=False):
        self.n_clusters = n_clusters
        self.n_neighbors = n_neighbors
        self.sigma = sigma
        self.max_iter = max_iter
        self.normalize = normalize

    def fit(self, X, y=None):
        X = check_points(X)
        m = X.shape[0]
        knn = self.n_neighbors if self.n_neighbors is not None else max(min(5, m - 1), 1)
        cfg = SpectralConfig(
            self.n_clusters,
            knn,
            self.sigma,
            KMedoidsConfig(self.n_clusters, self.max_iter),
            Metric(pre_normalize=self.normalize),
        )
        out = spectral_cluster(X, cfg)
        self.n_features_in_ = X.shape[1]
        self.center_indices_ = out.center_indices
        self.cluster_centers_ = X[out.center_indices].copy()
        self.labels_ = out.labels
        self.n_iter_ = out.iterations_run
        emb = getattr(out, "embedding", None)
        self.embedding_ = None if emb is None else emb.vectors
        self.eigenvalues_ = None if emb is None else emb.eigenvalues
        return self


class MultiSegmentTokenClustering(TransformerMixin, BaseEstimator):
    """Reduce a clip's patch tokens to K center tokens per temporal segment.

    ``transform`` accepts a ``(frames, tokens, dim)`` array, a batch of such
    arrays ``(n_clips, frames, tokens, dim)``, a ``TokenSet`` or a
    ``TokenSequence``, and returns the kept vectors in canonical order:
    ``(n_segments * n_clusters, dim)`` per clip.  The per-clip
    ``ClusterResult`` and reduced sequence of the last call are exposed as
    ``results_`` and ``sequences_``.  Clustering is stateless, so ``fit``
    only checks the input.
    """

    def __init__(
        self,
        n_segments=4,
        n_clusters=49,
        algorithm="kmedoids",
        max_iter=50,
        normalize=False,
        sigma=DEFAULT_SIGMA,
        n_neighbors=None,
        n_neighbors_extra=0,
        block_tag=None,
        grid_shape=None,
    ):
        self.n_segments = n_segments
        self.n_clusters = n_clusters
        self.algorithm = algorithm
        self.max_iter = max_iter
        self.normalize = normalize
        self.sigma = sigma
        self.n_neighbors = n_neighbors
        self.n_neighbors_extra = n_neighbors_extra
        self.block_tag = block_tag
        self.grid_shape = grid_shape

    def _stage(self):
        return ClusteringStage(
            segments=self.n_segments,
            clusters=self.n_clusters,
            algorithm=self.algorithm,
            max_iterations=self.max_iter,
            normalize=self.normalize,
            sigma=self.sigma,
            knn=self.n_neighbors,
            knn_extra=self.n_neighbors_extra,
            block_tag=self.block_tag,
        )

    def _clips(self, X):
        if isinstance(X, (TokenSet, TokenSequence)):
            return [X], False
        X = np.asarray(X)
        rows, cols = self.grid_shape if self.grid_shape is not None else (None, None)
        if X.ndim == 3:
            return [TokenSet.from_array(X, rows, cols)], False
        if X.ndim == 4:
            return [TokenSet.from_array(x, rows, cols) for x in X], True
        raise ValidationError(f"expected (frames, tokens, dim) or a batch of those, got shape {X.shape}")

    def fit(self, X, y=None):
        self._stage()
        clips, _ = self._clips(X)
        self.n_features_in_ = clips[0].dim
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        stage = self._stage()
        clips, batched = self._clips(X)
        self.results_, self.sequences_ = [], []
        for clip in clips:
            if clip.dim != self.n_features_in_:
                raise ValidationError(f"tokens have dim {clip.dim}, expected {self.n_features_in_}")
            result, seq = cluster_segments(clip, stage)
            self.results_.append(result)
            self.sequences_.append(seq)
        out = [np.array(s.vectors) for s in self.sequences_]
        return np.stack(out) if batched else out[0]
