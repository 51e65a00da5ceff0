"""Segmentation and annotation metrics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import VOID


@dataclass(frozen=True)
class ClassAccuracyReport:
    per_class: dict
    average: float

    def to_dict(self, names=None):
        per = {(names[c] if names else str(c)): v for c, v in sorted(self.per_class.items())}
        return {"per_class": per, "average": self.average}


@dataclass(frozen=True)
class MapReport:
    per_query: tuple
    mean: float


def confusion_counts(predicted, truth):
    """(correct, total) ground-truth pixel counts per class, void excluded."""
    predicted = np.asarray(predicted)
    truth = np.asarray(getattr(truth, "label_map", truth))
    if predicted.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {predicted.shape} vs {truth.shape}")
    valid = truth != VOID
    t = truth[valid].astype(np.int64)
    p = predicted[valid].astype(np.int64)
    size = int(max(t.max(initial=-1), p.max(initial=-1))) + 1
    total = np.bincount(t, minlength=size)
    correct = np.bincount(t[p == t], minlength=size)
    return correct, total


def report_from_counts(correct, total):
    present = np.flatnonzero(total > 0)
    per_class = {int(c): float(correct[c] / total[c]) for c in present}
    average = float(np.mean(list(per_class.values()))) if per_class else float("nan")
    return ClassAccuracyReport(per_class, average)


def per_class_accuracy(predicted, truth):
    """Fraction of each class's ground-truth pixels predicted correctly.

    Void pixels are ignored; classes absent from the ground truth are left
    out of the average.
    """
    return report_from_counts(*confusion_counts(predicted, truth))


def pooled_accuracy(pairs):
    """Per-class accuracy pooled over many (predicted, truth) pairs."""
    correct = np.zeros(0, dtype=np.int64)
    total = np.zeros(0, dtype=np.int64)
    for pred, gt in pairs:
        c, t = confusion_counts(pred, gt)
        n = max(len(correct), len(c))
        correct = np.pad(correct, (0, n - len(correct))) + np.pad(c, (0, n - len(c)))
        total = np.pad(total, (0, n - len(total))) + np.pad(t, (0, n - len(t)))
    return report_from_counts(correct, total)


def rank_labels(scores):
    """Label ids by descending score, ties broken by lower id."""
    scores = np.asarray(scores, dtype=np.float64)
    return [int(i) for i in np.lexsort((np.arange(len(scores)), -scores))]


def average_precision(scores, truth_set):
    truth_set = set(truth_set)
    if not truth_set:
        raise ValueError("empty truth set")
    hits, precisions = 0, []
    for rank, lab in enumerate(rank_labels(scores), start=1):
        if lab in truth_set:
            hits += 1
            precisions.append(hits / rank)
    # true labels missing from the score vector count as never retrieved
    return float(np.sum(precisions) / len(truth_set))


def mean_average_precision(score_rows, truth_sets):
    aps = tuple(average_precision(s, t) for s, t in zip(score_rows, truth_sets))
    return MapReport(aps, float(np.mean(aps)))
