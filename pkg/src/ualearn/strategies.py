"""Query strategies: score unlabeled samples by how informative a label would be.

Three single-model uncertainty scores (least confident, margin, entropy) and
one committee disagreement score (vote entropy). Each returns a
:class:`QueryScores` carrying the score vector and whether querying prefers
the maximum or the minimum; margin is the only minimizing strategy.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STRATEGY_NAMES = ("least_confident", "margin", "entropy", "vote_entropy")


@dataclass(frozen=True, eq=False)
class QueryScores:
    scores: np.ndarray
    direction: str  # "maximize" or "minimize"

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize"):
            raise ValueError(f"unknown direction {self.direction!r}")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")


def _check_prob_matrix(probs, min_classes: int = 1) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ValueError("expected an (n_samples, n_classes) probability matrix")
    if probs.shape[1] < min_classes:
        raise ValueError(f"need at least {min_classes} classes")
    if np.any(probs < 0):
        raise ValueError("probabilities must be non-negative")
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"row {bad} is not normalized (sums to {sums[bad]})")
    return probs


def _row_entropy_bits(p: np.ndarray) -> np.ndarray:
    terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=1)


def least_confident_scores(probs) -> QueryScores:
    """``1 - max_c p[i, c]``; higher means less confident."""
    probs = _check_prob_matrix(probs)
    return QueryScores(scores=1.0 - probs.max(axis=1), direction="maximize")


def margin_scores(probs) -> QueryScores:
    """Gap between the two most likely classes; smaller means harder."""
    probs = _check_prob_matrix(probs, min_classes=2)
    top2 = np.partition(probs, probs.shape[1] - 2, axis=1)[:, -2:]
    return QueryScores(scores=top2[:, 1] - top2[:, 0], direction="minimize")


def entropy_scores(probs) -> QueryScores:
    """Predictive entropy of each row, in bits."""
    probs = _check_prob_matrix(probs)
    return QueryScores(scores=_row_entropy_bits(probs), direction="maximize")


def vote_entropy_scores(votes, class_count: int) -> QueryScores:
    """Entropy (bits) of the committee's hard-vote distribution per sample.

    ``votes`` is ``(n_samples, n_members)`` with integer class labels; a
    committee needs at least two members. Full agreement scores 0 and a
    maximal split scores ``log2(min(n_members, class_count))``.
    """
    votes = np.asarray(votes)
    if votes.ndim != 2:
        raise ValueError("expected an (n_samples, n_members) vote matrix")
    n, members = votes.shape
    if members < 2:
        raise ValueError("vote entropy needs a committee of at least 2 members")
    if not np.issubdtype(votes.dtype, np.integer):
        raise ValueError("votes must be integer class labels")
    if n and (votes.min() < 0 or votes.max() >= class_count):
        raise ValueError(f"votes must lie in [0, {class_count})")
    counts = np.zeros((n, class_count))
    np.add.at(counts, (np.arange(n)[:, None], votes), 1.0)
    return QueryScores(scores=_row_entropy_bits(counts / members), direction="maximize")


def select_top_k(scores: QueryScores, k: int) -> np.ndarray:
    """Indices of the ``min(k, n)`` best samples, best first.

    Ties break toward the lowest index. The batch is taken in one pass, with
    no re-scoring between picks.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    values = np.asarray(scores.scores, dtype=np.float64)
    if values.size == 0:
        raise ValueError("cannot select from empty scores")
    key = -values if scores.direction == "maximize" else values
    order = np.argsort(key, kind="stable")
    return order[: min(k, values.size)]
