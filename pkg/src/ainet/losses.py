"""Training losses: projection-consistency MSE, region CE, bag CE, sum.

The total is the plain unweighted sum bag + region + mse, evaluated in
exactly that operand order so the additivity check is bitwise.
"""

import numpy as np

from . import tensor as at
from .errors import ShapeError

PROB_CLAMP = 1e-12


def mse_consistency(original, latent):
    """Mean over instances of the squared distance between raw and
    projected features: (1/N) * sum_i ||x_i - z_i||^2."""
    if original.shape != latent.shape:
        raise ShapeError(f"mse shape mismatch: {original.shape} vs {latent.shape}")
    n = original.shape[0]
    return at.scale(at.sq_diff_sum(original, latent), 1.0 / n)


def _nll(probs, onehot, scale_factor):
    logp = at.log(at.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP))
    return at.scale(at.tsum(at.mul(at.constant(onehot), logp)), scale_factor)


def cross_entropy_region(region_probs, label):
    """Mean cross-entropy of the region predictions against the bag label.

    Every region inherits the bag label; probabilities are clamped away
    from 0 and 1 before the log.
    """
    n_regions, n_classes = region_probs.shape
    onehot = np.zeros((n_regions, n_classes))
    onehot[:, label] = 1.0
    return _nll(region_probs, onehot, -1.0 / n_regions)


def cross_entropy_bag(bag_probs, label):
    """Cross-entropy of the bag prediction against the bag label."""
    (n_classes,) = bag_probs.shape
    onehot = np.zeros(n_classes)
    onehot[label] = 1.0
    return _nll(bag_probs, onehot, -1.0)


def total_loss(bag_loss, region_loss, mse_loss):
    """bag + region + mse, in that order."""
    return at.add(at.add(bag_loss, region_loss), mse_loss)
