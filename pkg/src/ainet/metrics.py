"""Classification metrics and stratified k-fold assignment.

Binary decisions use the fixed 0.5 threshold on the positive-class
probability (ties predict positive); multi-class uses argmax with ties
to the lower class index. AUC is the Mann-Whitney statistic (ties count
half); multi-class AUC and F1 are macro one-vs-rest. A class absent from
the labels makes its AUC undefined: it is reported as missing and
excluded from the macro mean rather than raising.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .rng import STREAM_FOLD, substream


def predicted_label(probs, n_classes):
    """Decision rule for one probability vector."""
    if n_classes == 2:
        return 1 if probs[1] >= 0.5 else 0
    return int(np.argmax(probs))


def predicted_labels(probs, n_classes):
    probs = np.asarray(probs)
    if n_classes == 2:
        return (probs[:, 1] >= 0.5).astype(int)
    return np.argmax(probs, axis=1)


def accuracy(probs, labels, n_classes):
    labels = np.asarray(labels)
    return float(np.mean(predicted_labels(probs, n_classes) == labels))


def auc_binary(scores, positives):
    """Mann-Whitney AUC of scores against a boolean positive mask.

    Midrank form: identical to counting concordant pairs with ties at
    half weight. None when either class is empty.
    """
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(np.asarray(scores, dtype=np.float64))
    return float((ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc(probs, labels, n_classes):
    """Binary AUC on p(class 1); macro one-vs-rest otherwise."""
    probs = np.asarray(probs)
    labels = np.asarray(labels)
    if n_classes == 2:
        return auc_binary(probs[:, 1], labels == 1)
    per_class = [auc_binary(probs[:, c], labels == c) for c in range(n_classes)]
    present = [v for v in per_class if v is not None]
    return float(np.mean(present)) if present else None


def f1(probs, labels, n_classes):
    """Binary F1 on class 1; macro-F1 otherwise. Zero-division gives 0."""
    labels = np.asarray(labels)
    preds = predicted_labels(probs, n_classes)

    def f1_class(c):
        tp = int(np.sum((preds == c) & (labels == c)))
        fp = int(np.sum((preds == c) & (labels != c)))
        fn = int(np.sum((preds != c) & (labels == c)))
        if tp == 0:
            return 0.0
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        return 2.0 * precision * recall / (precision + recall)

    if n_classes == 2:
        return f1_class(1)
    return float(np.mean([f1_class(c) for c in range(n_classes)]))


def kfold_assignments(labels, folds, seed):
    """Stratified fold index per bag, deterministic from the seed.

    Each class is shuffled and dealt round-robin, so per-fold class
    counts differ by at most one bag.
    """
    labels = np.asarray(labels)
    assign = np.empty(len(labels), dtype=int)
    rng = substream(seed, STREAM_FOLD)
    for c in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == c)
        idx = rng.permutation(idx)
        assign[idx] = np.arange(len(idx)) % folds
    return assign


def fold_split(labels, folds, seed, fold):
    """(train indices, test indices) for one fold."""
    assign = kfold_assignments(labels, folds, seed)
    return np.flatnonzero(assign != fold), np.flatnonzero(assign == fold)


def aggregate(values):
    """(mean, population std) over the non-missing values."""
    present = [v for v in values if v is not None]
    if not present:
        return None, None
    arr = np.asarray(present, dtype=np.float64)
    return float(arr.mean()), float(arr.std())


@dataclass
class FoldReport:
    fold: int
    accuracy: float
    auc: object  # float, or None when undefined
    f1: float
    predictions: list  # (bag_id, label, probs array) per test bag


def fold_report(fold, bag_ids, labels, probs, n_classes):
    probs = np.asarray(probs)
    return FoldReport(
        fold=fold,
        accuracy=accuracy(probs, labels, n_classes),
        auc=auc(probs, labels, n_classes),
        f1=f1(probs, labels, n_classes),
        predictions=[(b, int(y), probs[i]) for i, (b, y) in enumerate(zip(bag_ids, labels))],
    )


def _fmt(value):
    return "nan" if value is None else repr(float(value))


def write_metrics_csv(reports, path):
    """fold,accuracy,auc,f1 rows plus final mean and std rows."""
    acc_m, acc_s = aggregate([r.accuracy for r in reports])
    auc_m, auc_s = aggregate([r.auc for r in reports])
    f1_m, f1_s = aggregate([r.f1 for r in reports])
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["fold", "accuracy", "auc", "f1"])
        for r in reports:
            writer.writerow([r.fold, _fmt(r.accuracy), _fmt(r.auc), _fmt(r.f1)])
        writer.writerow(["mean", _fmt(acc_m), _fmt(auc_m), _fmt(f1_m)])
        writer.writerow(["std", _fmt(acc_s), _fmt(auc_s), _fmt(f1_s)])


def write_predictions_csv(report, path, n_classes):
    """bag_id,label,prob_0..prob_{C-1} rows for one fold's test bags."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["bag_id", "label"] + [f"prob_{c}" for c in range(n_classes)])
        for bag_id, label, probs in report.predictions:
            writer.writerow([bag_id, label] + [repr(float(p)) for p in probs])
