"""Synthetic token sets with planted redundancy.

Each patch position is tied to one of C blob centers for the whole clip,
so the same content repeats across frames with small Gaussian jitter.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial.distance import pdist

from ._validation import ValidationError, check_positive_float, check_positive_int
from .embedding import TokenSet


def make_redundant_tokens(
    n_blobs=5,
    dim=16,
    num_frames=4,
    grid_rows=5,
    grid_cols=5,
    jitter=0.05,
    separation=1.0,
    seed=0,
):
    """Return ``(TokenSet, labels)`` with ``labels`` the planted blob id of every token.

    Blob centers are rescaled so the closest pair sits exactly ``separation``
    apart.  Every blob owns at least one patch position.
    """
    C = check_positive_int(n_blobs, "n_blobs")
    d = check_positive_int(dim, "dim")
    F = check_positive_int(num_frames, "num_frames")
    rows = check_positive_int(grid_rows, "grid_rows")
    cols = check_positive_int(grid_cols, "grid_cols")
    jitter = float(jitter)
    if not np.isfinite(jitter) or jitter < 0:
        raise ValidationError(f"jitter must be non-negative, got {jitter}")
    separation = check_positive_float(separation, "separation")
    L = rows * cols
    if C > L:
        raise ValidationError(f"{C} blobs cannot all appear in a {rows}x{cols} grid")

    rng = np.random.default_rng(seed)
    centers = rng.standard_normal((C, d))
    if C > 1:
        closest = pdist(centers).min()
        if closest == 0:
            raise ValidationError("degenerate blob centers; use a larger dim")
        centers *= separation / closest
    else:
        centers *= separation / np.sqrt(d)
    position_labels = rng.permutation(np.arange(L) % C)
    data = centers[position_labels][None, :, :] + jitter * rng.standard_normal((F, L, d))
    labels = np.tile(position_labels, F)
    return TokenSet(data.astype(np.float32), rows, cols), labels
