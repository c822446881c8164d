"""Command-line entry point.

Subcommands: ``cluster``, ``synth``, ``bench`` and ``score``.  Reports are
JSON on stdout.  Exit status is 0 on success, 1 on a validation error and
2 on an I/O error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import statistics
import sys
import time
from pathlib import Path

import numpy as np

from ._validation import ValidationError
from .embedding import cluster_result_to_json, load_tokens, save_cluster_result, save_tokens
from .kmedoids import DEFAULT_MAX_ITERATIONS
from .retrieval import RetrievalBatch, contrastive_loss, rankings
from .segmenter import ClusteringStage, _partition, cluster_segments, reduction_report, split_segments
from .spectral import DEFAULT_SIGMA
from .synth import make_redundant_tokens

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2

log = logging.getLogger("tokencluster")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _add_clustering_flags(p):
    p.add_argument("--algorithm", choices=("kmedoids", "spectral"), default="kmedoids")
    p.add_argument("--segments", type=int, required=True, help="number of temporal segments S")
    p.add_argument("--clusters", type=int, required=True, help="center tokens kept per segment K")
    p.add_argument("--sigma", type=float, default=DEFAULT_SIGMA, help="Gaussian width for spectral graphs")
    p.add_argument("--knn", type=int, default=None, help="neighbours per vertex (default: 5 x frames per segment)")
    p.add_argument("--knn-extra", type=int, default=0, help="added to the default knn (5 for 16-px patch models)")
    p.add_argument("--normalize", action="store_true", help="l2-normalise tokens before clustering")
    p.add_argument("--max-iters", type=int, default=DEFAULT_MAX_ITERATIONS)
    p.add_argument("--block-tag", type=int, default=None, help="transformer block index, recorded as metadata")


def _add_synth_flags(p):
    p.add_argument("--blobs", type=int, default=5)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--grid-rows", type=int, default=5)
    p.add_argument("--grid-cols", type=int, default=5)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)


def _stage(args):
    return ClusteringStage(
        segments=args.segments,
        clusters=args.clusters,
        algorithm=args.algorithm,
        max_iterations=args.max_iters,
        normalize=args.normalize,
        sigma=args.sigma,
        knn=args.knn,
        knn_extra=args.knn_extra,
        block_tag=args.block_tag,
    )


def _synth_tokens(args):
    return make_redundant_tokens(
        n_blobs=args.blobs,
        dim=args.dim,
        num_frames=args.frames,
        grid_rows=args.grid_rows,
        grid_cols=args.grid_cols,
        jitter=args.jitter,
        separation=args.separation,
        seed=args.seed,
    )


def cmd_cluster(args):
    stage = _stage(args)
    tokens = load_tokens(args.input)
    result, reduced = cluster_segments(tokens, stage)
    out = Path(args.output)
    result_path = Path(args.result) if args.result else out.with_name(out.stem + ".clusters.json")
    save_tokens(reduced, out)
    save_cluster_result(result, result_path)
    report = reduction_report(tokens, reduced)
    report.update(result.metadata)
    report["output"] = str(out)
    report["cluster_result"] = str(result_path)
    _emit(report)
    return EXIT_OK


def cmd_synth(args):
    tokens, labels = _synth_tokens(args)
    out = Path(args.output)
    payload = save_tokens(tokens, out)
    labels_path = out.with_name(out.stem + ".labels.json")
    labels_path.write_text(
        json.dumps({"num_blobs": args.blobs, "seed": args.seed, "labels": labels.tolist()}) + "\n",
        encoding="utf-8",
    )
    _emit(
        {
            "manifest": str(out),
            "payload": str(payload),
            "labels": str(labels_path),
            "num_frames": tokens.num_frames,
            "tokens_per_frame": tokens.tokens_per_frame,
            "dim": tokens.dim,
            "num_tokens": len(tokens),
        }
    )
    return EXIT_OK


def _bench_once(seq, stage):
    spec, groups = split_segments(seq, stage.segments)
    times, iterations = [], []
    for pos in groups:
        points = seq.vectors[pos].astype(np.float64)
        t0 = time.perf_counter()
        outcome, _ = _partition(points, stage, spec.frames_per_segment)
        times.append(time.perf_counter() - t0)
        iterations.append(outcome.iterations_run)
    return times, iterations


def cmd_bench(args):
    stage = _stage(args)
    if args.input:
        seq = load_tokens(args.input)
    else:
        seq = _synth_tokens(args)[0].to_sequence()
    if args.repeats < 1:
        raise ValidationError(f"--repeats must be positive, got {args.repeats}")
    result, reduced = cluster_segments(seq, stage)
    digest = hashlib.sha256(cluster_result_to_json(result).encode()).hexdigest()
    totals, per_segment, iterations = [], [], []
    deterministic = True
    for _ in range(args.repeats):
        times, its = _bench_once(seq, stage)
        totals.append(sum(times))
        per_segment.append(statistics.median(times))
        iterations = its
        again, _ = cluster_segments(seq, stage)
        deterministic &= hashlib.sha256(cluster_result_to_json(again).encode()).hexdigest() == digest
    report = reduction_report(seq, reduced)
    m = len(seq) // stage.segments
    report.update(
        {
            "algorithm": stage.algorithm,
            "segments": stage.segments,
            "clusters": stage.clusters,
            "tokens_per_segment": m,
            "repeats": args.repeats,
            "median_total_seconds": statistics.median(totals),
            "median_segment_seconds": statistics.median(per_segment),
            "median_seconds_per_token": statistics.median(totals) / len(seq),
            "iterations_run": iterations,
            "max_iterations": stage.max_iterations,
            "result_sha256": digest,
            "deterministic": deterministic,
        }
    )
    _emit(report)
    return EXIT_OK


def _load_score_input(path):
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return np.asarray(doc["videos"], dtype=np.float64), np.asarray(doc["texts"], dtype=np.float64)
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"score input needs 'videos' (N, S, d) and 'texts' (N, d): {exc}") from exc
    except ValueError as exc:
        raise ValidationError(f"ragged or non-numeric representations: {exc}") from exc


def cmd_score(args):
    videos, texts = _load_score_input(args.input)
    batch = RetrievalBatch(videos, texts, args.tau)
    loss, sim = contrastive_loss(batch)
    _emit(
        {
            "tau": batch.tau,
            "num_pairs": len(batch),
            "similarity": sim.tolist(),
            "video_to_text_ranking": rankings(sim).tolist(),
            "text_to_video_ranking": rankings(sim.T).tolist(),
            "loss": loss,
        }
    )
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="tokencluster", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cluster", help="cluster a token file and write the reduced sequence")
    p.add_argument("--input", required=True, help="token manifest (dense or reduced)")
    p.add_argument("--output", required=True, help="manifest path for the reduced sequence")
    p.add_argument("--result", default=None, help="cluster result document (default: <output>.clusters.json)")
    _add_clustering_flags(p)
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("synth", help="generate a token set with planted clusters")
    p.add_argument("--output", required=True, help="manifest path to write")
    _add_synth_flags(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="time per-segment clustering")
    p.add_argument("--input", default=None, help="token manifest; synthesised from the synth flags if omitted")
    p.add_argument("--repeats", type=int, default=5)
    _add_clustering_flags(p)
    _add_synth_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("score", help="segment-level similarity, rankings and contrastive loss")
    p.add_argument("--input", required=True, help="JSON with 'videos' (N, S, d) and 'texts' (N, d)")
    p.add_argument("--tau", type=float, default=1.0, help="softmax temperature")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except json.JSONDecodeError as exc:
        print(f"error: invalid JSON: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
