"""
classification.py

Accuracy and AUROC for the downstream classifier.

AUROC is the Mann-Whitney statistic with average ranks for ties, so it is
invariant under strictly increasing transforms of the scores.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata


def accuracy(predictions, labels) -> float:
    p = np.asarray(predictions).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if p.shape != y.shape:
        raise ValueError(f"predictions and labels differ in length: {p.size} vs {y.size}")
    if p.size == 0:
        raise ValueError("accuracy of an empty set is undefined")
    return float(np.mean(p == y))


def auroc(scores, labels) -> float:
    """Binary AUROC; `labels` holds 0/1 (or booleans)."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1).astype(bool)
    if s.shape != y.shape:
        raise ValueError(f"scores and labels differ in length: {s.size} vs {y.size}")
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUROC needs both classes present")
    ranks = rankdata(s, method="average")
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_auroc(probabilities, labels) -> float:
    """
    AUROC of class-probability rows against integer labels.

    Two classes use the class-1 column; more classes average one-vs-rest AUROC
    over the classes present in `labels`.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if p.ndim != 2 or p.shape[0] != y.size:
        raise ValueError(f"probabilities {p.shape} do not match {y.size} labels")
    if p.shape[1] == 2:
        return auroc(p[:, 1], y == 1)
    present = [c for c in range(p.shape[1]) if 0 < np.sum(y == c) < y.size]
    if not present:
        raise ValueError("AUROC needs at least two classes present")
    return float(np.mean([auroc(p[:, c], y == c) for c in present]))
