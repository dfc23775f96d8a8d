"""Leakage diagnostics: degree / attribute-norm detectors and the candidate-argmax bias."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import AttributedGraph
from .metrics import auc, combine_mean_std, inliers


def degree_score(graph: AttributedGraph) -> np.ndarray:
    return graph.degrees.astype(np.float64)


def l2norm_score(graph: AttributedGraph) -> np.ndarray:
    return np.sqrt(np.asarray(graph.X.multiply(graph.X).sum(axis=1)).ravel())


def degnorm_score(graph: AttributedGraph) -> np.ndarray:
    """Standardised degree plus standardised attribute norm (training-free)."""
    return combine_mean_std(degree_score(graph), l2norm_score(graph))


@dataclass
class CandidateNormEstimate:
    probability: float
    successes: int
    conditioned: int

    @property
    def stderr(self) -> float:
        p = self.probability
        return float(np.sqrt(p * (1 - p) / max(self.conditioned, 1)))


def candidate_norm_estimate(n_rows: int, d: int, trials: int, seed: int,
                      distribution: str = "gaussian") -> CandidateNormEstimate:
    """Monte-Carlo estimate of P(||c_i|| > ||c_j|| given ||c_i - x|| > ||c_j - x||).

    A matrix X (n_rows x d) is drawn once; each trial samples three rows
    independently (target x and candidates c_i, c_j, with replacement). Trials
    where the two candidates are equidistant are discarded.
    """
    if d < 2:
        raise ValueError("need d >= 2: a rank-1 attribute matrix violates the rank assumption")
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    if distribution == "gaussian":
        X = rng.standard_normal((n_rows, d))
    elif distribution == "uniform":
        X = rng.uniform(0.0, 1.0, size=(n_rows, d))
    else:
        raise ValueError(f"unknown distribution {distribution!r}")
    norms = np.linalg.norm(X, axis=1)
    succ = cond = 0
    chunk = 1 << 16
    for lo in range(0, trials, chunk):
        size = min(chunk, trials - lo)
        t, a, b = (rng.integers(0, n_rows, size=size) for _ in range(3))
        da = np.linalg.norm(X[a] - X[t], axis=1)
        db = np.linalg.norm(X[b] - X[t], axis=1)
        far_a = da > db
        far_b = db > da
        # orient each pair so that the first candidate is the farther one
        hi = np.where(far_a, norms[a], norms[b])
        lo_ = np.where(far_a, norms[b], norms[a])
        keep = far_a | far_b
        cond += int(keep.sum())
        succ += int((hi[keep] > lo_[keep]).sum())
    p = succ / cond if cond else float("nan")
    return CandidateNormEstimate(p, succ, cond)


@dataclass
class LeakageSweepResult:
    dataset: str
    seed: int
    rows: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["k,distance,auc"]
        lines += [f"{k},{dist},{a:.6f}" for k, dist, a in self.rows]
        return "\n".join(lines) + "\n"


def leakage_sweep(bundle_factory, ks, distances=("euclidean",), dataset: str = "", seed: int = 0
                  ) -> LeakageSweepResult:
    """AUC of the attribute-norm detector on freshly injected contextual outliers.

    ``bundle_factory(k, distance)`` must return a bundle with contextual outliers.
    """
    ks = list(ks)
    if not ks:
        raise ValueError("ks must be non-empty")
    res = LeakageSweepResult(dataset, seed)
    for dist in distances:
        for k in ks:
            b = bundle_factory(k, dist)
            scores = l2norm_score(b.graph)
            res.rows.append((k, dist, auc(sorted(b.truth.contextual), inliers(b.truth, b.graph.n), scores)))
    return res

