"""Segment-level video-text similarity and the symmetric contrastive loss."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import log_softmax, softmax

from ._validation import ValidationError, check_positive_float

NORM_TOLERANCE = 1e-6


def _check_unit(v, name):
    norms = np.linalg.norm(v, axis=-1)
    bad = np.abs(norms - 1.0) > NORM_TOLERANCE
    if np.any(bad):
        where = tuple(int(i) for i in np.argwhere(np.atleast_1d(bad))[0])
        raise ValidationError(f"{name} is not unit-norm at {where} (norm {np.atleast_1d(norms)[where]:.8g})")


def pair_similarity(h, g):
    h = np.asarray(h, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if h.shape != g.shape or h.ndim != 1:
        raise ValidationError(f"shape mismatch: {h.shape} vs {g.shape}")
    _check_unit(h, "h")
    _check_unit(g, "g")
    return float(h @ g)


def segment_similarity(video_segments, g):
    """Mean over segments of segment-representation . text."""
    V = np.asarray(video_segments, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if V.ndim != 2 or V.shape[0] == 0:
        raise ValidationError("need a non-empty (S, d) array of segment representations")
    if V.shape[1] != g.shape[-1]:
        raise ValidationError(f"dimension mismatch: {V.shape[1]} vs {g.shape[-1]}")
    _check_unit(V, "video_segments")
    _check_unit(g, "g")
    return float(np.mean(V @ g))


@dataclass
class RetrievalBatch:
    """N videos of S segment vectors each, N texts, and the temperature.

    ``videos[i]`` is matched with ``texts[i]``.
    """

    videos: np.ndarray
    texts: np.ndarray
    tau: float = 1.0

    def __post_init__(self):
        self.videos = np.asarray(self.videos, dtype=np.float64)
        self.texts = np.asarray(self.texts, dtype=np.float64)
        if self.videos.ndim == 2:
            self.videos = self.videos[:, None, :]
        if self.videos.ndim != 3 or self.texts.ndim != 2:
            raise ValidationError(
                f"expected videos (N, S, d) and texts (N, d), got {self.videos.shape} and {self.texts.shape}"
            )
        N, S, d = self.videos.shape
        if N < 1 or S < 1:
            raise ValidationError("batch needs at least one video with one segment")
        if self.texts.shape != (N, d):
            raise ValidationError(f"texts shape {self.texts.shape} does not match videos {self.videos.shape}")
        if not (np.all(np.isfinite(self.videos)) and np.all(np.isfinite(self.texts))):
            raise ValidationError("batch contains non-finite values")
        _check_unit(self.videos, "videos")
        _check_unit(self.texts, "texts")
        self.tau = check_positive_float(self.tau, "tau")

    def __len__(self):
        return self.videos.shape[0]


def similarity_matrix(videos, texts):
    """``[i, j]`` = segment-level similarity of video i and text j (no norm checks)."""
    return np.einsum("isd,jd->ij", videos, texts) / videos.shape[1]


def loss_from_similarity(sim, tau):
    """Mean of the video->text and text->video cross-entropies over ``sim / tau``."""
    tau = check_positive_float(tau, "tau")
    logits = np.asarray(sim, dtype=np.float64) / tau
    v2t = -np.mean(np.diag(log_softmax(logits, axis=1)))
    t2v = -np.mean(np.diag(log_softmax(logits, axis=0)))
    return float((v2t + t2v) / 2.0)


def contrastive_loss(batch):
    """Returns ``(loss, similarity matrix)``."""
    sim = similarity_matrix(batch.videos, batch.texts)
    return loss_from_similarity(sim, batch.tau), sim


def loss_and_gradients(videos, texts, tau):
    """Loss plus its analytic gradients w.r.t. videos, texts and tau.

    Inputs are treated as free variables; unit norm is not enforced.
    """
    videos = np.asarray(videos, dtype=np.float64)
    texts = np.asarray(texts, dtype=np.float64)
    N, S, _ = videos.shape
    sim = similarity_matrix(videos, texts)
    logits = sim / tau
    eye = np.eye(N)
    # d loss / d logits
    G = (softmax(logits, axis=1) - eye + softmax(logits, axis=0) - eye) / (2.0 * N)
    G_sim = G / tau
    grad_videos = np.broadcast_to((G_sim @ texts)[:, None, :] / S, videos.shape).copy()
    grad_texts = G_sim.T @ videos.sum(axis=1) / S
    grad_tau = -float(np.sum(G * sim)) / (tau * tau)
    return loss_from_similarity(sim, tau), grad_videos, grad_texts, grad_tau


def rankings(sim):
    """Per-row descending order of ``sim``; ties keep the lower index first."""
    return np.argsort(-np.asarray(sim), axis=1, kind="stable")


def loss_gradient_check(batch, epsilon=1e-5):
    """Largest relative gap between analytic and central-difference gradients.

    Covers every component of every representation and tau.  The relative
    error of a component uses ``max(|analytic|, |numeric|, 1e-4)`` as its
    denominator so that vanishing gradients are judged on absolute error.
    """
    if not 1e-6 <= epsilon <= 1e-3:
        raise ValidationError(f"epsilon must lie in [1e-6, 1e-3], got {epsilon}")
    V, T, tau = batch.videos.copy(), batch.texts.copy(), batch.tau
    _, gV, gT, gtau = loss_and_gradients(V, T, tau)

    def f(V_, T_, tau_):
        return loss_from_similarity(similarity_matrix(V_, T_), tau_)

    worst = 0.0

    def compare(analytic, numeric):
        nonlocal worst
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-4)
        worst = max(worst, err)

    for idx in np.ndindex(V.shape):
        Vp, Vm = V.copy(), V.copy()
        Vp[idx] += epsilon
        Vm[idx] -= epsilon
        compare(gV[idx], (f(Vp, T, tau) - f(Vm, T, tau)) / (2 * epsilon))
    for idx in np.ndindex(T.shape):
        Tp, Tm = T.copy(), T.copy()
        Tp[idx] += epsilon
        Tm[idx] -= epsilon
        compare(gT[idx], (f(V, Tp, tau) - f(V, Tm, tau)) / (2 * epsilon))
    h = epsilon * tau
    compare(gtau, (f(V, T, tau + h) - f(V, T, tau - h)) / (2 * h))
    return worst
