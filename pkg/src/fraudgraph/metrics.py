"""Binary classification metrics: recall, F1, rank-based AUC.

Fraud (label 1) is the positive class throughout. AUC uses the rank-sum
statistic with midrank tie handling, i.e. the probability that a random
fraud outscores a random legitimate transaction, ties counted half.
"""

from __future__ import annotations

import numpy as np

from .errors import MetricError


def midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank range."""
    values = np.asarray(values)
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    n = values.size
    ranks = np.empty(n, dtype=np.float64)
    if n == 0:
        return ranks
    change = np.flatnonzero(sorted_vals[1:] != sorted_vals[:-1]) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [n]])
    avg = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auc_score(scores: np.ndarray, labels: np.ndarray) -> float:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs both classes present")
    ranks = midranks(scores)
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def recall_f1(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    predicted = scores >= threshold
    tp = int(np.sum(predicted & (labels == 1)))
    fn = int(np.sum(~predicted & (labels == 1)))
    fp = int(np.sum(predicted & (labels == 0)))
    recall = tp / (tp + fn) if tp + fn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall)
        if precision + recall > 0
        else 0.0
    )
    return recall, f1


def evaluate(scores: np.ndarray, labels: np.ndarray, threshold: float = 0.5):
    """(recall, auc, f1) at the given threshold.

    Raises MetricError when AUC is undefined (single-class labels); the
    exception carries the still-defined recall and f1 in `.partial`.
    """
    if np.asarray(scores).size == 0:
        raise MetricError("cannot evaluate an empty prediction set")
    recall, f1 = recall_f1(scores, labels, threshold)
    try:
        auc = auc_score(scores, labels)
    except MetricError as err:
        err.partial = (recall, f1)
        raise
    return recall, auc, f1
