"""Multi-segment token clustering.

Frames are split into S contiguous segments, each segment's tokens are
clustered on their own, and the K center tokens per segment are kept in
their original (frame, row, col) order.  Stages can be chained: a later
stage re-bins the surviving tokens by their original frame index.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ._validation import ValidationError, check_positive_int
from .distance import Metric
from .embedding import ClusterResult, SegmentClusters, SegmentSpec, TokenSequence, TokenSet
from .kmedoids import DEFAULT_MAX_ITERATIONS, KMedoidsConfig, kmedoids_pp
from .spectral import DEFAULT_SIGMA, SpectralConfig, default_knn, spectral_cluster

logger = logging.getLogger(__name__)

ALGORITHMS = ("kmedoids", "spectral")


@dataclass(frozen=True)
class ClusteringStage:
    """One clustering step, written ``(B_a - S, K)`` in experiment tables.

    ``block_tag`` is bookkeeping only: nothing here runs transformer blocks.
    ``knn=None`` means 5 neighbours per frame in a segment plus ``knn_extra``.
    """

    segments: int
    clusters: int
    algorithm: str = "kmedoids"
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    normalize: bool = False
    sigma: float = DEFAULT_SIGMA
    knn: int = None
    knn_extra: int = 0
    block_tag: int = None

    def __post_init__(self):
        check_positive_int(self.segments, "segments")
        check_positive_int(self.clusters, "clusters")
        check_positive_int(self.max_iterations, "max_iterations")
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.knn is not None:
            check_positive_int(self.knn, "knn")


@dataclass(frozen=True)
class ClusteringPlan:
    stages: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))


def as_sequence(tokens):
    if isinstance(tokens, TokenSequence):
        return tokens
    if isinstance(tokens, TokenSet):
        return tokens.to_sequence()
    raise TypeError(f"expected TokenSet or TokenSequence, got {type(tokens).__name__}")


def _canonical_order(indices):
    return np.lexsort((indices[:, 2], indices[:, 1], indices[:, 0]))


def split_segments(seq, num_segments):
    """Per segment, the positions in ``seq`` of its tokens in canonical order."""
    spec = SegmentSpec(seq.num_frames, num_segments)
    frames = seq.indices[:, 0]
    groups = []
    for j in range(num_segments):
        lo, hi = spec.frame_range(j)
        pos = np.flatnonzero((frames >= lo) & (frames < hi))
        pos = pos[_canonical_order(seq.indices[pos])]
        groups.append(pos)
    sizes = {len(g) for g in groups}
    if len(sizes) != 1:
        raise ValidationError(
            f"segments hold unequal token counts {[len(g) for g in groups]}; "
            f"cannot re-bin into S={num_segments} segments"
        )
    if 0 in sizes:
        raise ValidationError("segments are empty")
    return spec, groups


def _partition(points, stage, frames_per_segment):
    metric = Metric(pre_normalize=stage.normalize)
    km = KMedoidsConfig(stage.clusters, stage.max_iterations, metric)
    if stage.algorithm == "kmedoids":
        return kmedoids_pp(points, km), {}
    m = points.shape[0]
    knn = stage.knn if stage.knn is not None else default_knn(frames_per_segment, m, stage.knn_extra)
    cfg = SpectralConfig(
        stage.clusters,
        max(knn, 1),
        stage.sigma,
        KMedoidsConfig(stage.clusters, stage.max_iterations),
        metric,
    )
    return spectral_cluster(points, cfg), {"knn": knn}


def stage_metadata(stage, seq_len, out_len, iterations, knn):
    spectral = stage.algorithm == "spectral"
    return {
        "algorithm": stage.algorithm,
        "block_tag": stage.block_tag,
        "segments": stage.segments,
        "clusters": stage.clusters,
        "sigma": stage.sigma if spectral else None,
        "knn": knn if spectral else None,
        "normalize": stage.normalize,
        "max_iterations": stage.max_iterations,
        "iterations": iterations,
        "tokens_before": seq_len,
        "tokens_after": out_len,
    }


def cluster_segments(tokens, stage):
    """Run one clustering stage.  Returns ``(ClusterResult, reduced TokenSequence)``."""
    seq = as_sequence(tokens)
    spec, groups = split_segments(seq, stage.segments)
    m = len(groups[0])
    if stage.clusters > m:
        raise ValidationError(
            f"K={stage.clusters} exceeds tokens per segment m={m} "
            f"(need K <= {m} for S={stage.segments})"
        )
    segments, keep, iterations, knn_used = [], [], [], None
    for j, pos in enumerate(groups):
        points = seq.vectors[pos].astype(np.float64)
        outcome, extra = _partition(points, stage, spec.frames_per_segment)
        knn_used = extra.get("knn", knn_used)
        # members are in canonical order, so sorting local indices sorts centers canonically
        order = np.argsort(outcome.center_indices, kind="stable")
        centers_local = outcome.center_indices[order]
        relabel = np.empty_like(order)
        relabel[order] = np.arange(order.size)
        segments.append(
            SegmentClusters(
                frames=spec.frame_range(j),
                members=seq.indices[pos],
                centers=seq.indices[pos[centers_local]],
                assignment=relabel[outcome.labels],
            )
        )
        keep.append(pos[centers_local])
        iterations.append(outcome.iterations_run)
        logger.debug("segment %d: m=%d, %d iterations, cost %.6g", j, m, outcome.iterations_run, outcome.final_cost)
    keep = np.concatenate(keep)
    K = stage.clusters
    reduced = TokenSequence(
        indices=seq.indices[keep],
        vectors=seq.vectors[keep],
        num_frames=seq.num_frames,
        grid_rows=seq.grid_rows,
        grid_cols=seq.grid_cols,
        segment_bounds=tuple(range(0, K * stage.segments + 1, K)),
    )
    meta = stage_metadata(stage, len(seq), len(reduced), iterations, knn_used)
    result = ClusterResult(segments, meta)
    result.validate()
    return result, reduced


def run_plan(tokens, plan):
    """Apply the stages of ``plan`` in order.  Returns ``(final sequence, [ClusterResult, ...])``."""
    stages = plan.stages if isinstance(plan, ClusteringPlan) else tuple(plan)
    seq = as_sequence(tokens)
    results = []
    for n, stage in enumerate(stages):
        try:
            result, seq = cluster_segments(seq, stage)
        except ValidationError as exc:
            raise ValidationError(f"stage {n}: {exc}") from exc
        results.append(result)
    return seq, results


def reduction_report(before, after):
    """Token-count reduction and the quadratic self-attention cost proxy."""
    n_before, n_after = len(before), len(after)
    ratio = n_after / n_before
    return {
        "tokens_before": n_before,
        "tokens_after": n_after,
        "token_reduction_ratio": 1.0 - ratio,
        "attention_cost_ratio": ratio * ratio,
    }
