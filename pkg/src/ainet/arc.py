"""Anchor-guided region correction.

Anchors are concatenated in front of each region's latent features, the
fused set is projected to queries/keys/values (projections shared across
regions), and each region's queries attend over its own and its adjacent
region's keys/values. Low-scoring rows are then masked out by the shared
gated-attention scorer.

Variants kept for the component ablation: acf_attend (no neighbor, pure
per-region self-attention) and mha_fuse (vanilla multi-head
self-attention, no neighbor, no mask).
"""

import math
from dataclasses import dataclass

import numpy as np

from . import tensor as at
from .errors import ConfigError, ShapeError
from .tensor import Tensor

NEIGHBOR_MODES = ("wrap", "self-last")


@dataclass
class ArcParams:
    """Shared attention projections plus masking controls."""

    w_q: Tensor  # (D, D)
    w_k: Tensor  # (D, D)
    w_v: Tensor  # (D, D)
    mask_ratio: float = 0.9
    neighbor_mode: str = "wrap"


@dataclass
class CorrectedRegion:
    """Kept rows of one region after attention-based masking."""

    features: Tensor  # (kept, D), original row order
    is_anchor: np.ndarray  # (kept,) True where the row came from the anchor set
    scores: np.ndarray  # (kept,) raw masking scores of the surviving rows
    kept_indices: np.ndarray  # (kept,) row indices into the fused region


def fuse_anchors(region_latent, anchors):
    """Prepend the anchor features to a region's native features."""
    if len(anchors) == 0:
        return region_latent
    if anchors.features.shape[1] != region_latent.shape[1]:
        raise ShapeError(
            f"anchor dim {anchors.features.shape[1]} != region dim {region_latent.shape[1]}"
        )
    return at.concat_rows([anchors.features, region_latent])


def _neighbor_index(l, n_regions, mode):
    if mode == "wrap":
        return (l + 1) % n_regions
    if mode == "self-last":
        return l + 1 if l + 1 < n_regions else l
    raise ConfigError(f"unknown neighbor mode {mode!r}; expected one of {NEIGHBOR_MODES}")


def _project_qkv(fused, p):
    """One batched matmul per projection, re-split into per-region slices."""
    if len(fused) == 1:
        whole = fused[0]
    else:
        whole = at.concat_rows(fused)
    q_all = at.matmul(whole, p.w_q)
    k_all = at.matmul(whole, p.w_k)
    v_all = at.matmul(whole, p.w_v)
    qs, ks, vs = [], [], []
    start = 0
    for f in fused:
        stop = start + f.shape[0]
        qs.append(at.slice_rows(q_all, start, stop))
        ks.append(at.slice_rows(k_all, start, stop))
        vs.append(at.slice_rows(v_all, start, stop))
        start = stop
    return qs, ks, vs


def _attend(q, k, v):
    d_k = q.shape[1]
    scores = at.scale(at.matmul_t(q, k), 1.0 / math.sqrt(d_k))
    return at.matmul(at.softmax_rows(scores), v)


def cross_attend(fused, p):
    """Per-region attention over own + adjacent keys/values.

    The last region's neighbor is region 0 under "wrap", or itself under
    "self-last". A region that is its own neighbor (L = 1, or the
    self-last tail) attends over its own rows once, i.e. plain
    self-attention.
    """
    n_regions = len(fused)
    neighbors = [_neighbor_index(l, n_regions, p.neighbor_mode) for l in range(n_regions)]
    qs, ks, vs = _project_qkv(fused, p)
    results = []
    for l, nb in enumerate(neighbors):
        if nb == l:
            k_cat, v_cat = ks[l], vs[l]
        else:
            k_cat = at.concat_rows([ks[l], ks[nb]])
            v_cat = at.concat_rows([vs[l], vs[nb]])
        results.append(_attend(qs[l], k_cat, v_cat))
    return results


def acf_attend(fused, p):
    """Per-region self-attention: keys/values from the current region only."""
    qs, ks, vs = _project_qkv(fused, p)
    return [_attend(qs[l], ks[l], vs[l]) for l in range(len(fused))]


def mha_fuse(fused, p, heads=4):
    """Vanilla multi-head self-attention per region; no neighbor, no mask.

    Heads split the projected width; with heads=1 this is exactly
    acf_attend. No output projection, so the parameter set stays the
    shared q/k/v triple.
    """
    d = fused[0].shape[1]
    if d % heads != 0:
        raise ShapeError(f"feature dim {d} not divisible by {heads} heads")
    hd = d // heads
    qs, ks, vs = _project_qkv(fused, p)
    results = []
    for l in range(len(fused)):
        parts = []
        for h in range(heads):
            lo, hi = h * hd, (h + 1) * hd
            parts.append(
                _attend(
                    at.slice_cols(qs[l], lo, hi),
                    at.slice_cols(ks[l], lo, hi),
                    at.slice_cols(vs[l], lo, hi),
                )
            )
        results.append(parts[0] if heads == 1 else at.concat_cols(parts))
    return results


def mask_drop_count(n_rows, r):
    """M = floor(r * rows), never leaving fewer than one survivor."""
    m = int(np.floor(r * n_rows + 1e-9))
    return min(m, n_rows - 1)


def mask_indices(scores, r):
    """Row indices to keep (ascending) after dropping the M lowest scores.

    Equal scores are dropped at the higher index first.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = len(scores)
    m = mask_drop_count(n, r)
    drop_order = np.lexsort((-np.arange(n), scores))
    dropped = drop_order[:m]
    keep = np.ones(n, dtype=bool)
    keep[dropped] = False
    return np.flatnonzero(keep)


def mask_low_attention(region_feats, scores, r, n_anchors):
    """Drop the lowest-scoring rows of one corrected region.

    scores are the raw (pre-softmax) gated-attention scores of the rows;
    the indices are constants with respect to differentiation, so
    gradients flow only through the surviving rows.
    """
    kept = mask_indices(scores, r)
    return CorrectedRegion(
        features=at.gather_rows(region_feats, kept),
        is_anchor=kept < n_anchors,
        scores=np.asarray(scores, dtype=np.float64)[kept],
        kept_indices=kept,
    )


def unmasked_region(region_feats, n_anchors, scores=None):
    """CorrectedRegion that keeps every row (variants without masking)."""
    n = region_feats.shape[0]
    idx = np.arange(n)
    return CorrectedRegion(
        features=region_feats,
        is_anchor=idx < n_anchors,
        scores=np.asarray(scores, dtype=np.float64) if scores is not None else np.zeros(n),
        kept_indices=idx,
    )
