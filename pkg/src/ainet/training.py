"""Training loop (one bag per step), per-fold runs, and cross-validation.

Bag order is reshuffled every epoch from the run seed's shuffle
substream; optimizer state is sequential within a fold, while folds are
independent and can run as parallel worker processes.
"""

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import tensor as at
from .bags import load_bags, partition
from .errors import FormatError, NumericError
from .metrics import fold_report, fold_split, predicted_label
from .model import bag_loss, forward, init_params
from .optim import AdamW
from .rng import STREAM_SHUFFLE, substream


@dataclass
class EpochLog:
    epoch: int
    loss_total: float
    loss_bag: float
    loss_region: float
    loss_mse: float
    train_accuracy: float


def _check_dims(bags):
    dims = {b.dim for b in bags}
    if len(dims) > 1:
        raise FormatError(f"bags disagree on feature dim: {sorted(dims)}")
    return dims.pop()


def train_bags(bags, cfg):
    """Train on the given bags; returns (params, per-epoch logs)."""
    if not bags:
        raise FormatError("no bags to train on")
    dim = _check_dims(bags)
    parts = [partition(b, cfg.regions) for b in bags]
    params = init_params(cfg, dim)
    opt = AdamW(
        params.named(), lr=cfg.lr, weight_decay=cfg.weight_decay,
        betas=(cfg.beta1, cfg.beta2), eps=cfg.eps,
    )
    logs = []
    n = len(bags)
    for epoch in range(cfg.epochs):
        order = substream(cfg.seed, STREAM_SHUFFLE, epoch).permutation(n)
        sums = np.zeros(4)
        correct = 0
        for bi in order:
            bag = bags[bi]
            result = forward(bag, parts[bi], params, cfg)
            total, lb, lr, lm = bag_loss(result, bag.label)
            value = total.item()
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite loss {value} on bag {bag.bag_id!r} epoch {epoch}"
                )
            at.backward(total)
            opt.step()
            opt.zero_grad()
            sums += (value, lb.item(), lr.item(), lm.item())
            correct += predicted_label(result.bag_probs.data, cfg.classes) == bag.label
        means = sums / n
        logs.append(EpochLog(epoch, *(float(v) for v in means), correct / n))
    return params, logs


def predict_bags(bags, params, cfg):
    """(n_bags, C) probability matrix, computed off the tape."""
    probs = np.empty((len(bags), cfg.classes))
    with at.no_grad():
        for i, bag in enumerate(bags):
            part = partition(bag, cfg.regions)
            probs[i] = forward(bag, part, params, cfg).bag_probs.data
    return probs


def evaluate_fold(bags, params, cfg, fold):
    probs = predict_bags(bags, params, cfg)
    return fold_report(
        fold, [b.bag_id for b in bags], [b.label for b in bags], probs, cfg.classes
    )


def write_epoch_log(logs, path):
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(
            ["epoch", "loss_total", "loss_bag", "loss_region", "loss_mse",
             "train_accuracy"]
        )
        for row in logs:
            writer.writerow(
                [row.epoch, repr(row.loss_total), repr(row.loss_bag),
                 repr(row.loss_region), repr(row.loss_mse), repr(row.train_accuracy)]
            )


def train_fold(records, cfg, fold):
    """Train on everything outside the fold's test split."""
    labels = [label for _, _, label in records]
    train_idx, _ = fold_split(labels, cfg.folds, cfg.seed, fold)
    if len(train_idx) == 0:
        raise FormatError(f"fold {fold}: empty training split")
    bags = load_bags([records[i] for i in train_idx])
    return train_bags(bags, cfg)


def _cv_fold(args):
    records, cfg, fold = args
    params, _ = train_fold(records, cfg, fold)
    labels = [label for _, _, label in records]
    _, test_idx = fold_split(labels, cfg.folds, cfg.seed, fold)
    test_bags = load_bags([records[i] for i in test_idx])
    return evaluate_fold(test_bags, params, cfg, fold)


def cross_validate(records, cfg, workers=1):
    """Full k-fold cross-validation; returns one FoldReport per fold.

    Folds are independent runs (fresh parameters and optimizer state per
    fold), so workers > 1 farms them out to processes without changing
    any result.
    """
    jobs = [(records, cfg, fold) for fold in range(cfg.folds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_cv_fold, jobs))
    return [_cv_fold(job) for job in jobs]
