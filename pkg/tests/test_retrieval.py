import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference, contrastive_loss_reference
from tokencluster import (
    RetrievalBatch,
    ValidationError,
    contrastive_loss,
    loss_gradient_check,
    pair_similarity,
    segment_similarity,
)
from tokencluster.retrieval import loss_and_gradients, loss_from_similarity, rankings, similarity_matrix


def unit(r, *shape):
    v = r.standard_normal(shape)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def test_pair_similarity_extremes():
    e = np.array([0.6, 0.8])
    assert pair_similarity(e, e) == pytest.approx(1.0)
    assert pair_similarity(e, np.array([-0.8, 0.6])) == pytest.approx(0.0, abs=1e-15)
    assert pair_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0
    assert pair_similarity(e, -e) == pytest.approx(-1.0)


def test_norm_violation():
    with pytest.raises(ValidationError, match="unit-norm"):
        pair_similarity([1.0, 1.0], [1.0, 0.0])


def test_segment_similarity_values():
    g = np.array([math.sqrt(2) / 2, math.sqrt(2) / 2])
    assert segment_similarity([[1.0, 0.0], [0.0, 1.0]], g) == pytest.approx(math.sqrt(2) / 2, abs=1e-15)
    h = np.array([0.6, 0.8])
    assert segment_similarity([h], g) == pytest.approx(pair_similarity(h, g), abs=1e-15)
    assert segment_similarity([h] * 7, g) == pytest.approx(h @ g, abs=1e-15)
    with pytest.raises(ValidationError):
        segment_similarity(np.zeros((0, 2)), g)


def test_single_pair_loss_is_zero(rng):
    batch = RetrievalBatch(unit(rng, 1, 3, 4), unit(rng, 1, 4), 0.05)
    loss, sim = contrastive_loss(batch)
    assert loss == 0.0
    assert sim.shape == (1, 1)


def test_identity_pattern_closed_form():
    batch = RetrievalBatch(np.eye(2)[:, None, :], np.eye(2), 1.0)
    loss, sim = contrastive_loss(batch)
    np.testing.assert_array_equal(sim, np.eye(2))
    expected = -math.log(math.e / (math.e + 1))
    assert expected == pytest.approx(0.313262, abs=1e-6)
    assert loss == pytest.approx(expected, abs=1e-12)
    assert loss == pytest.approx(contrastive_loss_reference(np.eye(2).tolist(), 1.0), abs=1e-12)


def test_permutation_invariance(rng):
    V, T = unit(rng, 4, 2, 5), unit(rng, 4, 5)
    base, _ = contrastive_loss(RetrievalBatch(V, T, 0.3))
    for perm in itertools.permutations(range(4)):
        p = list(perm)
        assert contrastive_loss(RetrievalBatch(V[p], T[p], 0.3))[0] == pytest.approx(base, rel=1e-12)


def test_transpose_symmetry(rng):
    sim = np.tanh(rng.standard_normal((5, 5)))
    assert loss_from_similarity(sim, 0.7) == pytest.approx(loss_from_similarity(sim.T, 0.7), rel=1e-14)


def test_matches_reference(rng):
    V, T = unit(rng, 3, 4, 6), unit(rng, 3, 6)
    loss, sim = contrastive_loss(RetrievalBatch(V, T, 0.2))
    assert loss == pytest.approx(contrastive_loss_reference(sim.tolist(), 0.2), rel=1e-12)


def test_small_tau_is_stable():
    sim = np.array([[1.0, -1.0], [-1.0, 1.0]])
    loss = loss_from_similarity(sim, 1e-3)
    assert np.isfinite(loss) and loss >= 0.0


@pytest.mark.parametrize("tau", [0.0, -0.1])
def test_bad_tau(tau):
    with pytest.raises(ValidationError):
        RetrievalBatch(np.eye(2)[:, None, :], np.eye(2), tau)


def test_shape_mismatch():
    with pytest.raises(ValidationError):
        RetrievalBatch(np.eye(3)[:, None, :], np.eye(2), 1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 6), st.integers(1, 3), st.integers(2, 6), st.floats(0.05, 5.0), st.integers(0, 10**6))
def test_loss_positive_and_rankings_tau_invariant(N, S, d, tau, seed):
    r = np.random.default_rng(seed)
    V, T = unit(r, N, S, d), unit(r, N, d)
    loss, sim = contrastive_loss(RetrievalBatch(V, T, tau))
    assert loss > 0.0
    assert np.array_equal(rankings(sim / tau), rankings(sim / (tau / 2)))


def test_gradient_against_independent_differences(rng):
    V, T, tau = unit(rng, 3, 2, 4), unit(rng, 3, 4), 0.4
    _, gV, gT, gtau = loss_and_gradients(V, T, tau)
    flat = np.concatenate([V.ravel(), T.ravel(), [tau]]).tolist()

    def f(x):
        x = np.asarray(x)
        Vx = x[: V.size].reshape(V.shape)
        Tx = x[V.size : V.size + T.size].reshape(T.shape)
        S = V.shape[1]
        sim = [[sum(float(Vx[i, s] @ Tx[j]) for s in range(S)) / S for j in range(3)] for i in range(3)]
        return contrastive_loss_reference(sim, x[-1])

    numeric = central_difference(f, flat, 1e-6)
    analytic = np.concatenate([gV.ravel(), gT.ravel(), [gtau]])
    np.testing.assert_allclose(analytic, numeric, rtol=1e-6, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.integers(1, 3), st.integers(1, 8), st.floats(0.05, 2.0), st.integers(0, 10**6))
def test_gradient_check_property(N, S, d, tau, seed):
    r = np.random.default_rng(seed)
    assert loss_gradient_check(RetrievalBatch(unit(r, N, S, d), unit(r, N, d), tau)) <= 1e-4


def test_single_pair_gradient_is_zero(rng):
    _, gV, gT, gtau = loss_and_gradients(unit(rng, 1, 2, 3), unit(rng, 1, 3), 0.5)
    assert np.all(gV == 0) and np.all(gT == 0) and gtau == 0


def test_gradient_check_epsilon_range(rng):
    batch = RetrievalBatch(unit(rng, 2, 1, 3), unit(rng, 2, 3), 1.0)
    with pytest.raises(ValidationError):
        loss_gradient_check(batch, 1e-2)


def test_identity_pattern_is_minimiser_for_every_tau():
    # off-diagonal similarities pushed up or diagonal pulled down only raise the loss
    ident = np.eye(3)
    for tau in (0.25, 0.5, 1.0, 2.0):
        base = loss_from_similarity(ident, tau)
        for delta_diag, delta_off in itertools.product([0.0, -0.05, -0.2], [0.0, 0.05, 0.2]):
            if delta_diag == delta_off == 0.0:
                continue
            sim = ident + np.diag([delta_diag] * 3) + delta_off * (1 - ident)
            assert loss_from_similarity(sim, tau) > base
        assert loss_from_similarity(ident, tau) != loss_from_similarity(ident, 1.0) or tau == 1.0


def test_similarity_matrix_is_segment_mean(rng):
    V, T = unit(rng, 2, 3, 4), unit(rng, 2, 4)
    sim = similarity_matrix(V, T)
    for i in range(2):
        for j in range(2):
            assert sim[i, j] == pytest.approx(segment_similarity(V[i], T[j]), abs=1e-15)
