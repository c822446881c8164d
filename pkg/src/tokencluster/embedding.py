"""Token containers and the manifest + raw-payload file formats.

A dense token set is stored as two files: a JSON manifest and a payload of
little-endian float32 values laid out frame-major, then patch row, patch
column, then embedding component.  Reduced sequences use the same pair with
an extra ``indices`` array in the manifest, since they no longer cover the
full frame grid.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from ._validation import ValidationError

DTYPE = "f32le"
_PAYLOAD_DTYPE = np.dtype("<f4")


class TokenFileError(ValidationError):
    """Malformed manifest, payload size mismatch or non-finite payload."""


class TokenIndex(NamedTuple):
    """Spatio-temporal position of a patch token.

    Tuple comparison gives the canonical (frame, row, col) ordering.
    """

    frame: int
    row: int
    col: int


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def grid_indices(num_frames, grid_rows, grid_cols):
    """All (frame, row, col) triples of a dense grid, in canonical order."""
    f, r, c = np.meshgrid(
        np.arange(num_frames), np.arange(grid_rows), np.arange(grid_cols), indexing="ij"
    )
    return np.stack([f.ravel(), r.ravel(), c.ravel()], axis=1).astype(np.int64)


def _default_grid(tokens_per_frame):
    side = math.isqrt(tokens_per_frame)
    if side * side == tokens_per_frame:
        return side, side
    return 1, tokens_per_frame


@dataclass(frozen=True)
class TokenSet:
    """Dense patch embeddings of shape ``(num_frames, grid_rows * grid_cols, dim)``.

    Class tokens are not part of the set; strip them before construction.
    """

    data: np.ndarray
    grid_rows: int
    grid_cols: int

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 3:
            raise ValidationError(f"token data must be 3-D (frames, tokens, dim), got {data.shape}")
        F, L, d = data.shape
        if F < 1 or L < 1 or d < 1:
            raise ValidationError(f"token data has an empty axis: {data.shape}")
        if self.grid_rows < 1 or self.grid_cols < 1 or self.grid_rows * self.grid_cols != L:
            raise ValidationError(
                f"grid {self.grid_rows}x{self.grid_cols} does not match tokens_per_frame={L}"
            )
        data = data.astype(np.float32, copy=False)
        _check_finite(data.reshape(F * L, d), grid_indices(F, self.grid_rows, self.grid_cols))
        object.__setattr__(self, "data", _readonly(data))

    @classmethod
    def from_array(cls, data, grid_rows=None, grid_cols=None):
        data = np.asarray(data)
        if data.ndim != 3:
            raise ValidationError(f"token data must be 3-D (frames, tokens, dim), got {data.shape}")
        if grid_rows is None and grid_cols is None:
            grid_rows, grid_cols = _default_grid(data.shape[1])
        elif grid_rows is None:
            grid_rows = data.shape[1] // grid_cols
        elif grid_cols is None:
            grid_cols = data.shape[1] // grid_rows
        return cls(data, int(grid_rows), int(grid_cols))

    @property
    def num_frames(self):
        return self.data.shape[0]

    @property
    def tokens_per_frame(self):
        return self.data.shape[1]

    @property
    def dim(self):
        return self.data.shape[2]

    def __len__(self):
        return self.num_frames * self.tokens_per_frame

    def __getitem__(self, index):
        frame, row, col = index
        return self.data[frame, row * self.grid_cols + col]

    def indices(self):
        return grid_indices(self.num_frames, self.grid_rows, self.grid_cols)

    def to_sequence(self):
        return TokenSequence(
            indices=self.indices(),
            vectors=self.data.reshape(len(self), self.dim),
            num_frames=self.num_frames,
            grid_rows=self.grid_rows,
            grid_cols=self.grid_cols,
        )


@dataclass(frozen=True)
class TokenSequence:
    """An ordered list of tokens with their original positions.

    This is what clustering produces (the reduced sequence) and what later
    clustering stages consume.  ``segment_bounds`` holds the S + 1 offsets
    delimiting per-segment runs of tokens.
    """

    indices: np.ndarray
    vectors: np.ndarray
    num_frames: int
    grid_rows: int
    grid_cols: int
    segment_bounds: tuple = field(default=None)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        vec = np.asarray(self.vectors).astype(np.float32, copy=False)
        if idx.ndim != 2 or idx.shape[1] != 3:
            raise ValidationError(f"indices must have shape (n, 3), got {idx.shape}")
        if vec.ndim != 2 or vec.shape[0] != idx.shape[0] or vec.shape[1] < 1:
            raise ValidationError(
                f"vectors shape {vec.shape} does not match {idx.shape[0]} indices"
            )
        limits = np.array([self.num_frames, self.grid_rows, self.grid_cols])
        if np.any(idx < 0) or np.any(idx >= limits):
            raise ValidationError("token index out of range of the frame grid")
        _check_finite(vec, idx)
        bounds = self.segment_bounds
        if bounds is None:
            bounds = (0, idx.shape[0])
        bounds = tuple(int(b) for b in bounds)
        if bounds[0] != 0 or bounds[-1] != idx.shape[0] or any(
            b > a for a, b in zip(bounds[1:], bounds[:-1])
        ):
            raise ValidationError(f"invalid segment bounds {bounds} for {idx.shape[0]} tokens")
        object.__setattr__(self, "indices", _readonly(idx))
        object.__setattr__(self, "vectors", _readonly(vec))
        object.__setattr__(self, "segment_bounds", bounds)

    def __len__(self):
        return self.indices.shape[0]

    @property
    def dim(self):
        return self.vectors.shape[1]

    @property
    def num_segments(self):
        return len(self.segment_bounds) - 1

    def token_indices(self):
        return [TokenIndex(*map(int, row)) for row in self.indices]

    def segments(self):
        """Yield ``(indices, vectors)`` per recorded segment."""
        b = self.segment_bounds
        for lo, hi in zip(b[:-1], b[1:]):
            yield self.indices[lo:hi], self.vectors[lo:hi]

    def is_canonically_ordered(self):
        """Sorted within every segment and frame-monotone across segment boundaries."""
        for idx, _ in self.segments():
            if len(idx) > 1 and not _lex_sorted(idx):
                return False
        starts = self.segment_bounds[1:-1]
        for s in starts:
            if 0 < s < len(self) and self.indices[s, 0] < self.indices[s - 1, 0]:
                return False
        return True


def _lex_sorted(idx):
    keys = [tuple(r) for r in idx.tolist()]
    return all(a <= b for a, b in zip(keys, keys[1:]))


def _check_finite(vectors, indices):
    ok = np.isfinite(vectors)
    if not ok.all():
        row, comp = np.argwhere(~ok)[0]
        where = TokenIndex(*map(int, indices[row]))
        raise TokenFileError(
            f"non-finite value at token {where} (frame={where.frame}, row={where.row}, "
            f"col={where.col}), component {int(comp)}"
        )


@dataclass(frozen=True)
class SegmentSpec:
    """Partition of ``num_frames`` frames into ``num_segments`` equal contiguous runs."""

    num_frames: int
    num_segments: int

    def __post_init__(self):
        if self.num_segments < 1 or self.num_frames < 1:
            raise ValidationError("num_frames and num_segments must be positive")
        if self.num_frames % self.num_segments:
            raise ValidationError(
                f"S={self.num_segments} segments do not divide {self.num_frames} frames evenly"
            )

    @property
    def frames_per_segment(self):
        return self.num_frames // self.num_segments

    def frame_range(self, j):
        f = self.frames_per_segment
        return j * f, (j + 1) * f


# ---------------------------------------------------------------------------
# Cluster results


@dataclass(frozen=True)
class SegmentClusters:
    """Clustering of one segment.

    ``members`` lists the segment's tokens in canonical order; ``assignment[i]``
    is the cluster of ``members[i]`` and cluster ``c`` is centred on
    ``centers[c]``.
    """

    frames: tuple
    members: np.ndarray
    centers: np.ndarray
    assignment: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(int(f) for f in self.frames))
        object.__setattr__(self, "members", _readonly(np.asarray(self.members, dtype=np.int64).reshape(-1, 3)))
        object.__setattr__(self, "centers", _readonly(np.asarray(self.centers, dtype=np.int64).reshape(-1, 3)))
        object.__setattr__(self, "assignment", _readonly(np.asarray(self.assignment, dtype=np.int64).ravel()))

    @property
    def k(self):
        return self.centers.shape[0]

    def center_indices(self):
        return [TokenIndex(*map(int, c)) for c in self.centers]

    def validate(self):
        k, n = self.k, self.members.shape[0]
        if k < 1:
            raise ValidationError("segment has no centers")
        if self.assignment.shape[0] != n:
            raise ValidationError(f"assignment length {self.assignment.shape[0]} != {n} members")
        if n and (self.assignment.min() < 0 or self.assignment.max() >= k):
            raise ValidationError(f"assignment ids must lie in [0, {k})")
        centers = [tuple(c) for c in self.centers.tolist()]
        if len(set(centers)) != k:
            raise ValidationError("centers are not distinct")
        if centers != sorted(centers):
            raise ValidationError("centers are not in canonical (frame, row, col) order")
        position = {tuple(m): i for i, m in enumerate(self.members.tolist())}
        for c, key in enumerate(centers):
            if key not in position:
                raise ValidationError(f"center {key} is not a member of its segment")
            if self.assignment[position[key]] != c:
                raise ValidationError(f"center {key} is not assigned to its own cluster {c}")

    def __eq__(self, other):
        if not isinstance(other, SegmentClusters):
            return NotImplemented
        return (
            self.frames == other.frames
            and np.array_equal(self.members, other.members)
            and np.array_equal(self.centers, other.centers)
            and np.array_equal(self.assignment, other.assignment)
        )


@dataclass(frozen=True)
class ClusterResult:
    segments: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))

    @property
    def num_centers(self):
        return sum(s.k for s in self.segments)

    def validate(self):
        if not self.segments:
            raise ValidationError("cluster result has no segments")
        for s in self.segments:
            s.validate()


def _atomic_write(path, data, mode="w"):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    if "b" in mode:
        with open(tmp, mode) as fh:
            fh.write(data)
    else:
        with open(tmp, mode, encoding="utf-8") as fh:
            fh.write(data)
    os.replace(tmp, path)


def cluster_result_to_json(result):
    doc = {
        "format": "cluster-result/1",
        "metadata": result.metadata,
        "num_segments": len(result.segments),
        "total_centers": result.num_centers,
        "segments": [
            {
                "frames": list(s.frames),
                "centers": [
                    {"frame": f, "row": r, "col": c} for f, r, c in s.centers.tolist()
                ],
                "members": s.members.ravel().tolist(),
                "assignment": s.assignment.tolist(),
            }
            for s in result.segments
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def save_cluster_result(result, path):
    result.validate()
    _atomic_write(path, cluster_result_to_json(result))


def load_cluster_result(path):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        segments = [
            SegmentClusters(
                frames=seg["frames"],
                members=np.asarray(seg["members"], dtype=np.int64).reshape(-1, 3),
                centers=[[c["frame"], c["row"], c["col"]] for c in seg["centers"]],
                assignment=seg["assignment"],
            )
            for seg in doc["segments"]
        ]
        result = ClusterResult(segments, doc.get("metadata", {}))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise TokenFileError(f"malformed cluster result document {path}: {exc}") from exc
    result.validate()
    return result


# ---------------------------------------------------------------------------
# Token payloads


def _payload_path(manifest_path):
    p = Path(manifest_path)
    stem = p.name[: -len(".json")] if p.name.endswith(".json") else p.name
    return p.with_name(stem + ".f32")


def save_tokens(tokens, manifest_path):
    """Write a TokenSet or TokenSequence as manifest + payload.  Returns the payload path."""
    manifest_path = Path(manifest_path)
    payload = _payload_path(manifest_path)
    if isinstance(tokens, TokenSet):
        vectors = tokens.data.reshape(len(tokens), tokens.dim)
        manifest = {
            "dim": tokens.dim,
            "num_frames": tokens.num_frames,
            "tokens_per_frame": tokens.tokens_per_frame,
            "grid_rows": tokens.grid_rows,
            "grid_cols": tokens.grid_cols,
            "dtype": DTYPE,
            "payload": payload.name,
        }
    else:
        vectors = tokens.vectors
        manifest = {
            "dim": tokens.dim,
            "num_frames": tokens.num_frames,
            "tokens_per_frame": tokens.grid_rows * tokens.grid_cols,
            "grid_rows": tokens.grid_rows,
            "grid_cols": tokens.grid_cols,
            "dtype": DTYPE,
            "payload": payload.name,
            "num_tokens": len(tokens),
            "segment_bounds": list(tokens.segment_bounds),
            "indices": tokens.indices.tolist(),
        }
    _atomic_write(payload, np.ascontiguousarray(vectors, dtype=_PAYLOAD_DTYPE).tobytes(), "wb")
    _atomic_write(manifest_path, json.dumps(manifest) + "\n")
    return payload


def _read_manifest(manifest_path):
    manifest_path = Path(manifest_path)
    text = manifest_path.read_text(encoding="utf-8")  # OSError propagates as I/O failure
    try:
        m = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TokenFileError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(m, dict):
        raise TokenFileError(f"manifest {manifest_path} must be a JSON object")
    for key in ("dim", "num_frames", "tokens_per_frame", "payload"):
        if key not in m:
            raise TokenFileError(f"manifest {manifest_path} is missing key {key!r}")
    for key in ("dim", "num_frames", "tokens_per_frame"):
        v = m[key]
        if isinstance(v, bool) or not isinstance(v, int) or v < 1:
            raise TokenFileError(f"manifest key {key!r} must be a positive integer, got {v!r}")
    if m.get("dtype", DTYPE) != DTYPE:
        raise TokenFileError(f"unsupported dtype {m['dtype']!r}; only {DTYPE!r} is supported")
    L = m["tokens_per_frame"]
    if "grid_rows" in m or "grid_cols" in m:
        rows = m.get("grid_rows", L // max(m.get("grid_cols", 1), 1))
        cols = m.get("grid_cols", L // max(rows, 1))
        if not (isinstance(rows, int) and isinstance(cols, int)) or rows * cols != L:
            raise TokenFileError(f"grid {rows}x{cols} does not match tokens_per_frame={L}")
    else:
        rows, cols = _default_grid(L)
    m["grid_rows"], m["grid_cols"] = rows, cols
    return m


def _read_payload(manifest_path, m, count):
    payload = Path(manifest_path).parent / m["payload"]
    raw = payload.read_bytes()
    expected = count * m["dim"] * _PAYLOAD_DTYPE.itemsize
    if len(raw) != expected:
        raise TokenFileError(
            f"payload size mismatch: {payload} has {len(raw)} bytes, expected {expected} "
            f"({count} tokens x {m['dim']} dims x 4 bytes)"
        )
    return np.frombuffer(raw, dtype=_PAYLOAD_DTYPE).reshape(count, m["dim"])


def load_token_set(manifest_path):
    """Load a dense token set described by a manifest."""
    m = _read_manifest(manifest_path)
    if "indices" in m:
        raise TokenFileError(f"{manifest_path} describes a reduced sequence, not a dense token set")
    F, L = m["num_frames"], m["tokens_per_frame"]
    vectors = _read_payload(manifest_path, m, F * L)
    return TokenSet(vectors.reshape(F, L, m["dim"]), m["grid_rows"], m["grid_cols"])


def load_tokens(manifest_path):
    """Load either manifest flavour as a TokenSequence."""
    m = _read_manifest(manifest_path)
    if "indices" not in m:
        return load_token_set(manifest_path).to_sequence()
    try:
        idx = np.asarray(m["indices"], dtype=np.int64).reshape(-1, 3)
    except (TypeError, ValueError) as exc:
        raise TokenFileError(f"manifest indices are malformed: {exc}") from exc
    n = m.get("num_tokens", idx.shape[0])
    if n != idx.shape[0]:
        raise TokenFileError(f"num_tokens={n} but {idx.shape[0]} indices listed")
    vectors = _read_payload(manifest_path, m, n)
    return TokenSequence(
        idx, vectors, m["num_frames"], m["grid_rows"], m["grid_cols"], m.get("segment_bounds")
    )
