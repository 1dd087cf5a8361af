"""Dual-level anchor mining.

Instances are projected into a latent space by a two-layer MLP, scored
by a convex combination of their cosine similarity to their own region's
embedding (local representativeness, weight alpha) and to the whole-bag
embedding (global discriminativeness, weight 1 - alpha), and the top-k%
become the anchor set.

Scoring and selection are deliberately outside the tape: selection is
hard, and gradients reach the chosen features only through the row
gather.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as at
from .errors import ConfigError
from .tensor import Tensor

SELECTOR_MODES = ("dam", "attention", "maxpool", "bag", "region")

COSINE_EPS = 1e-12


@dataclass
class DamParams:
    """Projection MLP weights plus the local/global mixing factor."""

    w1: Tensor  # (D, D)
    b1: Tensor  # (D,)
    w2: Tensor  # (D, D)
    b2: Tensor  # (D,)
    alpha: float = 0.7


@dataclass
class AnchorSet:
    indices: np.ndarray  # (T,) global instance indices, unique
    features: Tensor  # (T, D) latent features of the selected instances
    weights: np.ndarray  # (T,) selection weights, non-increasing

    def __len__(self):
        return len(self.indices)


def project(features, p):
    """Two-layer MLP into the latent space: relu(x W1 + b1) W2 + b2."""
    hidden = at.relu(at.add(at.matmul(features, p.w1), p.b1))
    return at.add(at.matmul(hidden, p.w2), p.b2)


def embeddings(latent, part):
    """Mean-pooled bag embedding and per-region embeddings (no gradient).

    Returns (f_bag (D,), f_reg list of (D,)).
    """
    data = latent.data if isinstance(latent, Tensor) else np.asarray(latent)
    n = data.shape[0]
    f_reg = [data[idx].sum(axis=0) / len(idx) for idx in part.regions]
    f_bag = data.sum(axis=0) / n
    return f_bag, f_reg


def _cosine_to(rows, v):
    """Cosine of each row against v, with the documented epsilon guard."""
    row_norms = np.sqrt(np.einsum("ij,ij->i", rows, rows))
    v_norm = np.sqrt(float(np.dot(v, v)))
    return (rows @ v) / ((row_norms + COSINE_EPS) * (v_norm + COSINE_EPS))


def _dual_cosines(data, part, f_bag, f_reg):
    n = data.shape[0]
    w_region = np.empty(n)
    for idx, emb in zip(part.regions, f_reg):
        w_region[idx] = _cosine_to(data[idx], emb)
    w_bag = _cosine_to(data, f_bag)
    return w_region, w_bag


def anchor_weights(latent, part, f_bag, f_reg, alpha):
    """Per-instance weight alpha*cos(region) + (1-alpha)*cos(bag).

    Plain values, no gradient; exactly linear in alpha by construction.
    """
    data = latent.data if isinstance(latent, Tensor) else np.asarray(latent)
    w_region, w_bag = _dual_cosines(data, part, f_bag, f_reg)
    return alpha * w_region + (1.0 - alpha) * w_bag


def top_k_count(k_percent, n):
    """T = floor(k% * N); the tiny bump keeps decimal k from rounding under."""
    return int(np.floor(k_percent * n / 100.0 + 1e-9))


def select_anchors(latent, weights, k_percent):
    """Pick the T = floor(k% * N) largest-weight instances.

    Ties go to the lower global index. k = 0 gives an empty anchor set
    and the rest of the pipeline degrades gracefully.
    """
    n = len(weights)
    t = top_k_count(k_percent, n)
    order = np.lexsort((np.arange(n), -weights))
    idx = order[:t]
    return AnchorSet(
        indices=idx,
        features=at.gather_rows(latent, idx),
        weights=weights[idx],
    )


def selector_variant(mode, latent, part, f_bag, f_reg, alpha=0.7, scorer=None):
    """Instance weights under the alternative selection rules.

    dam       alpha-mixed dual cosine (the default rule)
    bag       cosine to the bag embedding only (== dam with alpha 0)
    region    cosine to the own-region embedding only (== dam with alpha 1)
    attention raw gated-attention scores from the predictor's scorer
    maxpool   maximum latent coordinate per instance
    """
    data = latent.data if isinstance(latent, Tensor) else np.asarray(latent)
    if mode == "dam":
        return anchor_weights(latent, part, f_bag, f_reg, alpha)
    if mode == "bag":
        return _cosine_to(data, f_bag)
    if mode == "region":
        w_region, _ = _dual_cosines(data, part, f_bag, f_reg)
        return w_region
    if mode == "attention":
        if scorer is None:
            raise ConfigError("attention selector needs the predictor's scorer")
        return np.asarray(scorer(data), dtype=np.float64)
    if mode == "maxpool":
        return data.max(axis=1)
    raise ConfigError(f"unknown selector mode {mode!r}; expected one of {SELECTOR_MODES}")
