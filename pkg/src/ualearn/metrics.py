"""Evaluation artifacts: confusion matrix, per-class report, one-vs-rest
ROC/AUC, and learning-curve summaries, plus their CSV serializations.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


def confusion(preds, truth, class_count: int) -> np.ndarray:
    """Confusion matrix with rows = true class, columns = predicted class."""
    preds = np.asarray(preds, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if preds.shape != truth.shape or preds.ndim != 1:
        raise ValueError("preds and truth must be equal-length label vectors")
    for name, arr in (("preds", preds), ("truth", truth)):
        if arr.size and (arr.min() < 0 or arr.max() >= class_count):
            raise ValueError(f"{name} contains labels outside [0, {class_count})")
    cm = np.zeros((class_count, class_count), dtype=np.int64)
    np.add.at(cm, (truth, preds), 1)
    return cm


@dataclass
class ClassificationReport:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float


def report(cm: np.ndarray) -> ClassificationReport:
    """Per-class precision/recall/F1 and overall accuracy from a confusion matrix.

    A class that is never predicted (or never present) gets 0 for the
    affected metric, with a warning.
    """
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] < 1:
        raise ValueError("confusion matrix must be square and non-empty")
    total = int(cm.sum())
    if total == 0:
        raise ValueError("confusion matrix is empty")
    diag = np.diag(cm).astype(np.float64)
    col = cm.sum(axis=0).astype(np.float64)
    row = cm.sum(axis=1).astype(np.float64)
    for c in np.flatnonzero(col == 0):
        warnings.warn(f"class {c} was never predicted; precision set to 0", stacklevel=2)
    for c in np.flatnonzero(row == 0):
        warnings.warn(f"class {c} has no true samples; recall set to 0", stacklevel=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        precision = np.where(col > 0, diag / np.where(col > 0, col, 1.0), 0.0)
        recall = np.where(row > 0, diag / np.where(row > 0, row, 1.0), 0.0)
        denom = precision + recall
        f1 = np.where(denom > 0, 2.0 * precision * recall / np.where(denom > 0, denom, 1.0), 0.0)
    return ClassificationReport(
        precision=precision,
        recall=recall,
        f1=f1,
        support=row.astype(np.int64),
        accuracy=float(diag.sum() / total),
    )


def _binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Trapezoidal area under the ROC curve; tied scores form one step."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    pos = positive[order]
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    tp = np.cumsum(pos)
    fp = np.cumsum(~pos)
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tpr = np.r_[0.0, tp[last_of_group] / n_pos]
    fpr = np.r_[0.0, fp[last_of_group] / n_neg]
    return float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) * 0.5))


def roc_auc_ovr(scores, truth) -> np.ndarray:
    """One-vs-rest AUC per class from an (n, classes) probability matrix.

    A class with no positives (or no negatives) has an undefined ROC; its
    entry is NaN and a warning is emitted rather than reporting 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.int64)
    if scores.ndim != 2 or truth.ndim != 1 or scores.shape[0] != truth.shape[0]:
        raise ValueError("scores must be (n, classes) with one truth label per row")
    sums = scores.sum(axis=1)
    if np.any(scores < 0) or np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("score rows must be normalized probability vectors")
    n_classes = scores.shape[1]
    out = np.empty(n_classes)
    for c in range(n_classes):
        positive = truth == c
        if positive.all() or not positive.any():
            warnings.warn(f"AUC undefined for class {c} (one-sided labels)", stacklevel=2)
            out[c] = np.nan
            continue
        out[c] = _binary_auc(scores[:, c], positive)
    return out


def learning_curve_summary(history) -> float:
    """Area under test accuracy vs labeled-set size, normalized by the size span.

    ``history`` is a sequence of round records (anything with
    ``labeled_size`` and ``test_accuracy`` attributes) or of
    ``(labeled_size, accuracy)`` pairs, in round order. A single point
    returns its accuracy; a zero-width span returns the mean accuracy.
    """
    points = list(history)
    if not points:
        raise ValueError("history is empty")
    if hasattr(points[0], "labeled_size"):
        sizes = np.array([p.labeled_size for p in points], dtype=np.float64)
        accs = np.array([p.test_accuracy for p in points], dtype=np.float64)
    else:
        sizes = np.array([p[0] for p in points], dtype=np.float64)
        accs = np.array([p[1] for p in points], dtype=np.float64)
    if len(points) == 1:
        return float(accs[0])
    span = sizes[-1] - sizes[0]
    if span == 0:
        return float(accs.mean())
    area = float(np.sum((sizes[1:] - sizes[:-1]) * (accs[1:] + accs[:-1]) * 0.5))
    return area / float(span)


def confusion_to_csv(cm: np.ndarray, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for row in np.asarray(cm):
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def report_to_csv(rep: ClassificationReport, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("class,precision,recall,f1,support\n")
        for c in range(len(rep.precision)):
            fh.write(
                f"{c},{float(rep.precision[c])!r},{float(rep.recall[c])!r},"
                f"{float(rep.f1[c])!r},{int(rep.support[c])}\n"
            )
        fh.write(f"accuracy,{float(rep.accuracy)!r},,,\n")


def auc_to_csv(aucs: np.ndarray, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write("class,auc\n")
        for c, v in enumerate(np.asarray(aucs)):
            fh.write(f"{c},{'nan' if np.isnan(v) else repr(float(v))}\n")
