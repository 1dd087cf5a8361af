"""Built-in oracle suite behind the `selfcheck` command.

Each check recomputes an expected answer by an independent route (brute
force, exhaustive pairs, finite differences) and compares the library
against it. All checks are deterministic.
"""

import numpy as np

from .arc import mask_drop_count, mask_indices
from .dam import select_anchors, top_k_count
from .gradcheck import pipeline_gradient_check
from .metrics import auc_binary
from .synth import SynthConfig, generate_bag
from .tensor import constant


def check_gradients():
    err = pipeline_gradient_check()
    return err < 1e-4, f"max relative error {err:.3g} (tolerance 1e-4)"


def check_top_k():
    rng = np.random.default_rng(11)
    for trial in range(1000):
        n = int(rng.integers(1, 40))
        weights = np.round(rng.standard_normal(n), 1)  # coarse values force ties
        k = float(rng.integers(0, 101))
        expected = sorted(range(n), key=lambda i: (-weights[i], i))[:top_k_count(k, n)]
        got = select_anchors(constant(np.zeros((n, 2))), weights, k).indices
        if list(got) != expected:
            return False, f"trial {trial}: {list(got)} != {expected}"
    return True, "1000 random (weights, k) cases match the full-sort oracle"


def check_auc():
    rng = np.random.default_rng(12)
    for trial in range(100):
        n = int(rng.integers(2, 201))
        scores = np.round(rng.standard_normal(n), 1)
        labels = rng.integers(0, 2, n)
        got = auc_binary(scores, labels == 1)
        pos = scores[labels == 1]
        neg = scores[labels == 0]
        if len(pos) == 0 or len(neg) == 0:
            if got is not None:
                return False, f"trial {trial}: expected missing AUC"
            continue
        pairs = (pos[:, None] > neg[None, :]).sum() + 0.5 * (pos[:, None] == neg[None, :]).sum()
        expected = pairs / (len(pos) * len(neg))
        if abs(got - expected) > 1e-12:
            return False, f"trial {trial}: {got} != {expected}"
    return True, "100 score sets match the exhaustive pairwise oracle to 1e-12"


def check_mask_counts():
    rng = np.random.default_rng(13)
    for trial in range(500):
        t = int(rng.integers(0, 30))
        z = int(rng.integers(1, 60))
        r = float(rng.uniform(0.0, 0.999))
        scores = np.round(rng.standard_normal(t + z), 1)
        kept = mask_indices(scores, r)
        expect_kept = t + z - mask_drop_count(t + z, r)
        if len(kept) != expect_kept or expect_kept < 1:
            return False, f"trial {trial}: kept {len(kept)} != {expect_kept}"
        drop = sorted(range(t + z), key=lambda i: (scores[i], -i))[: t + z - expect_kept]
        if sorted(set(range(t + z)) - set(drop)) != list(kept):
            return False, f"trial {trial}: dropped set mismatch"
    return True, "500 random (T, Z, r) triples keep exactly T+Z-floor(r*(T+Z)) rows"


def check_generator_labels():
    cfg = SynthConfig(n_bags=2000, n_instances=64, dim=8, n_classes=2,
                      tumor_rate=0.1, n_morphologies=4, noise_sigma=0.5, seed=99)
    for i in range(cfg.n_bags):
        bag, info = generate_bag(cfg, i)
        if (bag.label == 0) != (info["tumor_count"] == 0):
            return False, f"bag {i}: label {bag.label} with {info['tumor_count']} tumors"
    return True, "2000 bags: label is 0 exactly when the bag has no tumor instance"


CHECKS = (
    ("gradient-fidelity", check_gradients),
    ("top-k-oracle", check_top_k),
    ("auc-oracle", check_auc),
    ("mask-count-identity", check_mask_counts),
    ("generator-label-rule", check_generator_labels),
)


def run_selfcheck(out=print):
    """Run every check; returns True when all pass."""
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok &= ok
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return all_ok
