"""Deterministic multi-segment token clustering for video token sequences."""
from ._validation import ValidationError
from .distance import Metric, gaussian_similarity, squared_distance
from .embedding import (
    ClusterResult,
    SegmentClusters,
    SegmentSpec,
    TokenFileError,
    TokenIndex,
    TokenSequence,
    TokenSet,
    load_cluster_result,
    load_token_set,
    load_tokens,
    save_cluster_result,
    save_tokens,
)
from .estimators import KKZKMeans, KMedoidsPP, MultiSegmentTokenClustering, SpectralTokenClustering
from .kmedoids import KMedoidsConfig, PartitionOutcome, kkz_init, kmeans, kmedoids_pp
from .retrieval import (
    RetrievalBatch,
    contrastive_loss,
    loss_gradient_check,
    pair_similarity,
    segment_similarity,
)
from .segmenter import ClusteringPlan, ClusteringStage, cluster_segments, reduction_report, run_plan
from .spectral import (
    SpectralConfig,
    build_knn_graph,
    normalized_laplacian,
    sign_flip,
    smallest_eigenvectors,
    spectral_cluster,
)

__version__ = "0.1.0"
