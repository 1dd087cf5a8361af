"""Gated-attention pooling head with region- and bag-level classifiers.

One scorer (tanh x sigmoid gate) and one linear classifier are shared by
everything: each region pools its kept features with softmax-normalized
scores, the bag pools the union of all kept features, and the same raw
scores double as the masking signal inside the correction module.
"""

from dataclasses import dataclass

from . import tensor as at
from .errors import ShapeError
from .tensor import Tensor


@dataclass
class PredictorParams:
    att_v: Tensor  # (D, H) tanh branch
    att_u: Tensor  # (D, H) sigmoid gate branch
    att_w: Tensor  # (H, 1) score projection
    cls_w: Tensor  # (D, C)
    cls_b: Tensor  # (C,)


def gated_scores(feats, p):
    """Raw (pre-softmax) attention scores, one per row of feats."""
    if feats.ndim != 2 or feats.shape[0] < 1:
        raise ShapeError(f"gated_scores expects a non-empty matrix, got {feats.shape}")
    gate = at.mul(
        at.tanh(at.matmul(feats, p.att_v)),
        at.sigmoid(at.matmul(feats, p.att_u)),
    )
    return at.reshape(at.matmul(gate, p.att_w), (feats.shape[0],))


def gated_scores_values(feats_data, p):
    """Score plain feature rows outside the tape (masking / selector use)."""
    with at.no_grad():
        return gated_scores(at.constant(feats_data), p).data


def _pool(weights, feats):
    """Softmax-weighted mean of feature rows -> (1, D)."""
    return at.matmul(at.reshape(at.softmax(weights), (1, weights.shape[0])), feats)


def predict(corrected, p):
    """Region-level and bag-level class probabilities.

    The scorer runs once over the concatenated kept features; each
    region softmax-normalizes its own slice of the raw scores, the bag
    head normalizes over all of them. Returns (region_probs (L, C),
    bag_probs (C,)).
    """
    if not corrected:
        raise ShapeError("predict needs at least one region")
    for c in corrected:
        if c.features.shape[0] < 1:
            raise ShapeError("every region must keep at least one feature")

    feats_all = at.concat_rows([c.features for c in corrected])
    raw = gated_scores(feats_all, p)

    pooled = []
    start = 0
    for c in corrected:
        stop = start + c.features.shape[0]
        pooled.append(_pool(at.slice_rows(raw, start, stop), c.features))
        start = stop

    region_logits = at.add(at.matmul(at.concat_rows(pooled), p.cls_w), p.cls_b)
    region_probs = at.softmax_rows(region_logits)

    bag_pooled = _pool(raw, feats_all)
    bag_logits = at.add(at.matmul(bag_pooled, p.cls_w), p.cls_b)
    bag_probs = at.reshape(at.softmax_rows(bag_logits), (p.cls_b.shape[0],))
    return region_probs, bag_probs
