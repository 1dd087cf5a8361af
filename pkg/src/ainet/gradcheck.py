"""Finite-difference verification of the backward pass.

The oracle re-runs the full forward pass twice per parameter entry
(central differences), never touching the tape, so it is independent of
the gradients it checks.
"""

import numpy as np

from . import tensor as at
from .bags import partition
from .config import RunConfig
from .model import bag_loss, forward, init_params
from .synth import SynthConfig, generate_bag


def finite_diff_grads(loss_fn, named_tensors, h=1e-5):
    """Central-difference gradient of loss_fn() per entry of each tensor.

    Entries are perturbed in place and restored; loss_fn must recompute
    the loss from scratch on every call.
    """
    out = {}
    for name, t in named_tensors.items():
        flat = t.data.reshape(-1)
        grad = np.empty(flat.shape)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn()
            flat[i] = orig - h
            f_minus = loss_fn()
            flat[i] = orig
            grad[i] = (f_plus - f_minus) / (2.0 * h)
        out[name] = grad.reshape(t.data.shape)
    return out


def max_rel_error(a, b, floor=1e-5):
    """max |a-b| / max(floor, |a|, |b|) over all entries.

    The floor keeps near-zero entries meaningful: central differences on
    an O(100) loss carry ~1e-10 of roundoff, so entries below the floor
    are effectively checked at 1e-9 absolute rather than drowning the
    relative test in finite-difference noise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(floor, np.maximum(np.abs(a), np.abs(b)))
    return float((np.abs(a - b) / denom).max())


def pipeline_gradient_check(n_instances=16, dim=8, regions=4, k_percent=25.0,
                            mask_ratio=0.5, classes=2, hidden_dim=16,
                            variant="full", seed=20240, h=1e-5):
    """Max relative error between backward and finite differences, over
    every parameter entry of every module, on one synthetic bag."""
    cfg = RunConfig(
        regions=regions, k_percent=k_percent, mask_ratio=mask_ratio,
        classes=classes, hidden_dim=hidden_dim, variant=variant, seed=seed,
    ).validate()
    synth = SynthConfig(
        n_bags=2, n_instances=n_instances, dim=dim, n_classes=classes,
        tumor_rate=0.2, n_morphologies=2, noise_sigma=0.5, seed=seed,
    )
    bag, _ = generate_bag(synth, 1)  # index 1 -> a positive bag
    part = partition(bag, regions)
    params = init_params(cfg, dim)
    named = params.named()

    def loss_value():
        result = forward(bag, part, params, cfg)
        return bag_loss(result, bag.label)[0].item()

    total, _, _, _ = bag_loss(forward(bag, part, params, cfg), bag.label)
    at.backward(total)
    analytic = {name: t.grad.copy() for name, t in named.items()}
    for t in named.values():
        t.zero_grad()

    numeric = finite_diff_grads(loss_value, named, h=h)
    return max(max_rel_error(numeric[name], analytic[name]) for name in named)
