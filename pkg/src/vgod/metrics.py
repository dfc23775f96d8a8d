"""AUC, subset AUC, AucGap and score-combination strategies.

Scores are plain float64 arrays indexed by node id.
"""
from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .graph import OutlierGroundTruth


def _ids(nodes) -> np.ndarray:
    if isinstance(nodes, np.ndarray) and nodes.dtype == bool:
        return np.flatnonzero(nodes)
    return np.fromiter(nodes, dtype=np.int64) if not isinstance(nodes, np.ndarray) else nodes.astype(np.int64)


def auc(outliers, normals, scores) -> float:
    """Probability that a random outlier outscores a random normal node (ties count 1/2).

    Computed from average ranks (Mann-Whitney U); the rank sums are exact
    half-integers so the result matches a pairwise count bit for bit.
    """
    pos, neg = _ids(outliers), _ids(normals)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("auc needs non-empty outlier and normal sets")
    scores = np.asarray(scores, dtype=np.float64)
    ranks = rankdata(np.concatenate([scores[pos], scores[neg]]), method="average")
    u = ranks[:len(pos)].sum() - len(pos) * (len(pos) + 1) / 2.0
    return float(u / (len(pos) * len(neg)))


def auc_bruteforce(outliers, normals, scores) -> float:
    """O(|outliers| * |normals|) reference count."""
    scores = np.asarray(scores, dtype=np.float64)
    wins = 0.0
    for i in _ids(outliers):
        for j in _ids(normals):
            if scores[i] > scores[j]:
                wins += 1.0
            elif scores[i] == scores[j]:
                wins += 0.5
    return wins / (len(_ids(outliers)) * len(_ids(normals)))


def inliers(truth: OutlierGroundTruth, n: int) -> np.ndarray:
    return np.flatnonzero(~truth.mask(n))


def auc_on_subset(subset, truth: OutlierGroundTruth, scores) -> float:
    """AUC of ``subset`` against the nodes that are not outliers of any kind."""
    subset = _ids(subset)
    if len(subset) == 0:
        raise ValueError("empty outlier subset")
    if not set(subset.tolist()) <= truth.all:
        raise ValueError("subset must be drawn from the labelled outliers")
    return auc(subset, inliers(truth, len(scores)), scores)


def aucgap(truth: OutlierGroundTruth, scores) -> float:
    if not truth.structural or not truth.contextual:
        raise ValueError("AucGap needs both structural and contextual outliers")
    a = auc_on_subset(truth.structural, truth, scores)
    b = auc_on_subset(truth.contextual, truth, scores)
    if a == 0 or b == 0:
        raise ZeroDivisionError("a subset AUC is zero")
    return max(a / b, b / a)


def standardize(s) -> np.ndarray:
    """Subtract the mean and divide by the population std (constant input -> zeros)."""
    s = np.asarray(s, dtype=np.float64)
    std = s.std()
    if std == 0:
        return np.zeros_like(s)
    return (s - s.mean()) / std


def _pair(s1, s2):
    s1, s2 = np.asarray(s1, dtype=np.float64), np.asarray(s2, dtype=np.float64)
    if s1.shape != s2.shape:
        raise ValueError(f"score length mismatch: {s1.shape} vs {s2.shape}")
    return s1, s2


def combine_mean_std(s1, s2) -> np.ndarray:
    s1, s2 = _pair(s1, s2)
    if len(s1) < 2:
        raise ValueError("mean-std combination needs at least two nodes")
    return standardize(s1) + standardize(s2)


def combine_weighted(s1, s2, alpha: float = 0.5) -> np.ndarray:
    s1, s2 = _pair(s1, s2)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return alpha * s1 + (1.0 - alpha) * s2


def sum_to_unit(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64)
    if np.any(s <= 0):
        raise ValueError("sum-to-unit normalisation needs strictly positive scores")
    return s / s.sum()


def combine_sum_to_unit(s1, s2) -> np.ndarray:
    s1, s2 = _pair(s1, s2)
    return sum_to_unit(s1) + sum_to_unit(s2)


def combine(strategy: str, s1, s2, alpha: float = 0.5) -> np.ndarray:
    if strategy == "mean-std":
        return combine_mean_std(s1, s2)
    if strategy == "weighted":
        return combine_weighted(s1, s2, alpha)
    if strategy == "sum-to-unit":
        return combine_sum_to_unit(s1, s2)
    raise ValueError(f"unknown combination strategy {strategy!r}")
