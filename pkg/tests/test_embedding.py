import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tokencluster import (
    ClusterResult,
    SegmentClusters,
    SegmentSpec,
    TokenFileError,
    TokenIndex,
    TokenSet,
    ValidationError,
    load_cluster_result,
    load_token_set,
    load_tokens,
    save_cluster_result,
    save_tokens,
)
from tokencluster.embedding import TokenSequence


def write_manifest(tmp_path, payload_bytes, **fields):
    (tmp_path / "t.f32").write_bytes(payload_bytes)
    manifest = {"dtype": "f32le", "payload": "t.f32", **fields}
    path = tmp_path / "t.json"
    path.write_text(json.dumps(manifest))
    return path


def test_minimal_manifest(tmp_path):
    path = write_manifest(
        tmp_path, np.array([1.5, -2.0], "<f4").tobytes(), dim=2, num_frames=1, tokens_per_frame=1
    )
    ts = load_token_set(path)
    assert len(ts) == 1
    np.testing.assert_array_equal(ts[TokenIndex(0, 0, 0)], [1.5, -2.0])


def test_truncated_payload(tmp_path):
    path = write_manifest(tmp_path, np.zeros(3, "<f4").tobytes(), dim=2, num_frames=1, tokens_per_frame=2)
    with pytest.raises(TokenFileError, match="size mismatch"):
        load_token_set(path)


def test_vit_b32_shape(tmp_path, rng):
    data = rng.standard_normal((12, 49, 512)).astype("<f4")
    path = write_manifest(
        tmp_path, data.tobytes(), dim=512, num_frames=12, tokens_per_frame=49, grid_rows=7, grid_cols=7
    )
    ts = load_token_set(path)
    assert (ts.num_frames, ts.tokens_per_frame, ts.dim) == (12, 49, 512)
    assert len(ts) == 588
    # row-major: frame, then row, then col, then component
    np.testing.assert_array_equal(ts[TokenIndex(3, 2, 5)], data[3, 2 * 7 + 5])


def test_non_finite_names_first_offender(tmp_path):
    data = np.zeros((2, 4, 3), "<f4")
    data[1, 2, 1] = np.nan
    data[1, 3, 0] = np.inf
    path = write_manifest(
        tmp_path, data.tobytes(), dim=3, num_frames=2, tokens_per_frame=4, grid_rows=2, grid_cols=2
    )
    with pytest.raises(TokenFileError, match=r"frame=1, row=1, col=0"):
        load_token_set(path)


@pytest.mark.parametrize(
    "text",
    [
        "not json",
        json.dumps([1, 2]),
        json.dumps({"dim": 2, "num_frames": 1, "payload": "t.f32"}),
        json.dumps({"dim": 0, "num_frames": 1, "tokens_per_frame": 1, "payload": "t.f32"}),
        json.dumps({"dim": 2, "num_frames": 1, "tokens_per_frame": 1, "payload": "t.f32", "dtype": "f64"}),
        json.dumps({"dim": 2, "num_frames": 1, "tokens_per_frame": 4, "grid_rows": 3, "grid_cols": 3, "payload": "t.f32"}),
    ],
)
def test_malformed_manifest(tmp_path, text):
    (tmp_path / "t.f32").write_bytes(np.zeros(8, "<f4").tobytes())
    (tmp_path / "t.json").write_text(text)
    with pytest.raises(TokenFileError):
        load_token_set(tmp_path / "t.json")


def test_missing_manifest_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_token_set(tmp_path / "absent.json")


def test_token_set_round_trip_bit_exact(tmp_path, rng):
    ts = TokenSet(rng.standard_normal((4, 6, 5)).astype(np.float32), 2, 3)
    save_tokens(ts, tmp_path / "x.json")
    back = load_token_set(tmp_path / "x.json")
    assert back.data.tobytes() == ts.data.tobytes()
    assert (back.grid_rows, back.grid_cols) == (2, 3)
    assert (tmp_path / "x.f32").stat().st_size == 4 * 6 * 5 * 4


def test_reduced_sequence_round_trip(tmp_path, rng):
    idx = np.array([[0, 0, 1], [0, 1, 0], [1, 0, 0], [1, 1, 1]])
    seq = TokenSequence(idx, rng.standard_normal((4, 3)), 2, 2, 2, (0, 2, 4))
    save_tokens(seq, tmp_path / "r.json")
    back = load_tokens(tmp_path / "r.json")
    assert np.array_equal(back.indices, seq.indices)
    assert back.vectors.tobytes() == seq.vectors.tobytes()
    assert back.segment_bounds == (0, 2, 4)
    with pytest.raises(TokenFileError):
        load_token_set(tmp_path / "r.json")


def test_token_set_rejects_bad_grid():
    with pytest.raises(ValidationError):
        TokenSet(np.zeros((1, 6, 2), np.float32), 2, 2)


def test_token_index_canonical_order():
    assert TokenIndex(0, 5, 5) < TokenIndex(1, 0, 0) < TokenIndex(1, 0, 1) < TokenIndex(1, 1, 0)


def test_segment_spec():
    spec = SegmentSpec(12, 3)
    assert spec.frames_per_segment == 4
    assert [spec.frame_range(j) for j in range(3)] == [(0, 4), (4, 8), (8, 12)]
    with pytest.raises(ValidationError, match="divide"):
        SegmentSpec(12, 5)


def _result(n_segments=3, k=49, frames_per_segment=4, grid=(7, 7)):
    segs = []
    rows, cols = grid
    for j in range(n_segments):
        members = np.array(
            [(f, r, c) for f in range(j * frames_per_segment, (j + 1) * frames_per_segment)
             for r in range(rows) for c in range(cols)]
        )
        centers = members[:: len(members) // k][:k]
        assignment = np.minimum(np.arange(len(members)) // (len(members) // k), k - 1)
        segs.append(SegmentClusters((j * frames_per_segment, (j + 1) * frames_per_segment), members, centers, assignment))
    return ClusterResult(segs, {"algorithm": "kmedoids", "clusters": k, "segments": n_segments})


def test_cluster_result_round_trip(tmp_path):
    res = _result()
    save_cluster_result(res, tmp_path / "c.json")
    back = load_cluster_result(tmp_path / "c.json")
    assert back.segments == res.segments
    assert back.metadata == res.metadata


def test_cluster_result_lists_147_centers(tmp_path):
    save_cluster_result(_result(), tmp_path / "c.json")
    doc = json.loads((tmp_path / "c.json").read_text())
    assert sum(len(s["centers"]) for s in doc["segments"]) == 147
    assert doc["total_centers"] == 147
    assert set(doc["segments"][0]["centers"][0]) == {"frame", "row", "col"}


def test_empty_result_rejected_before_write(tmp_path):
    with pytest.raises(ValidationError):
        save_cluster_result(ClusterResult([]), tmp_path / "c.json")
    assert not (tmp_path / "c.json").exists()


def test_center_outside_own_cluster_rejected():
    members = np.array([[0, 0, 0], [0, 0, 1], [0, 0, 2]])
    seg = SegmentClusters((0, 1), members, members[[0, 2]], [0, 0, 0])
    with pytest.raises(ValidationError, match="own cluster"):
        seg.validate()


def test_unsorted_centers_rejected():
    members = np.array([[0, 0, 0], [0, 0, 1]])
    seg = SegmentClusters((0, 1), members, members[[1, 0]], [1, 0])
    with pytest.raises(ValidationError, match="canonical"):
        seg.validate()


def test_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        save_cluster_result(_result(1, 2, 1, (1, 2)), tmp_path / "missing-dir" / "c.json")


@settings(max_examples=40, deadline=None)
@given(
    frames=st.integers(1, 4),
    rows=st.integers(1, 3),
    cols=st.integers(1, 3),
    dim=st.integers(1, 6),
    seed=st.integers(0, 2**32 - 1),
)
def test_round_trip_property(tmp_path_factory, frames, rows, cols, dim, seed):
    d = tmp_path_factory.mktemp("rt")
    data = np.random.default_rng(seed).standard_normal((frames, rows * cols, dim)).astype(np.float32)
    ts = TokenSet(data, rows, cols)
    save_tokens(ts, d / "p.json")
    assert load_token_set(d / "p.json").data.tobytes() == ts.data.tobytes()
