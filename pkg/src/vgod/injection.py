"""Outlier injection: clique (structural), farthest-candidate (contextual), community swap."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .graph import AttributedGraph, DatasetBundle, OutlierGroundTruth

DISTANCES = ("euclidean", "cosine")


class InjectionError(ValueError):
    pass


@dataclass(frozen=True)
class InjectionParams:
    p: int = 5
    q: int = 15
    k: int = 50
    distance: str = "euclidean"
    seed: int = 0

    def validate(self, n: int) -> None:
        if self.q < 2:
            raise InjectionError("clique size q must be >= 2")
        if self.k < 1:
            raise InjectionError("candidate set size k must be >= 1")
        if self.p * self.q > n / 2:
            raise InjectionError("p*q must not exceed n/2")
        if self.distance not in DISTANCES:
            raise InjectionError(f"unknown distance {self.distance!r}")


def _as_bundle(source) -> DatasetBundle:
    if isinstance(source, DatasetBundle):
        return source
    return DatasetBundle(source, OutlierGroundTruth(), {})


def _free_nodes(bundle: DatasetBundle) -> np.ndarray:
    taken = bundle.truth.all
    return np.array([i for i in range(bundle.graph.n) if i not in taken], dtype=np.int64)


def _extend(bundle, graph, truth, step) -> DatasetBundle:
    prov = dict(bundle.provenance)
    prov["steps"] = list(prov.get("steps", [])) + [step]
    return DatasetBundle(graph, bundle.truth.merge(truth), prov)


def inject_structural_cliques(source, p: int, q: int, seed: int, tag: str | None = None) -> DatasetBundle:
    """Connect ``p`` random disjoint groups of ``q`` nodes into cliques.

    ``source`` may be a graph or a bundle; nodes already marked as outliers in a
    bundle are never chosen again.
    """
    bundle = _as_bundle(source)
    g = bundle.graph
    if q < 2:
        raise InjectionError("clique size q must be >= 2")
    if p < 0:
        raise InjectionError("p must be non-negative")
    free = _free_nodes(bundle)
    if p * q > len(free):
        raise InjectionError(f"need {p * q} non-outlier nodes, only {len(free)} available")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(free, size=p * q, replace=False)
    cliques = chosen.reshape(p, q)
    iu, ju = np.triu_indices(q, k=1)
    new = np.concatenate([np.stack([c[iu], c[ju]], axis=1) for c in cliques]) if p else np.empty((0, 2), int)
    graph = g.with_edges(np.concatenate([g.edges, new]))
    tag = tag or f"q={q}"
    truth = OutlierGroundTruth(structural=chosen, groups={tag: chosen})
    step = {"kind": "clique", "p": p, "q": q, "seed": seed, "tag": tag,
            "cliques": cliques.tolist()}
    return _extend(bundle, graph, truth, step)


def inject_mixed_cliques(source, qs=(3, 5, 10, 15), fraction: float = 0.02, seed: int = 0) -> DatasetBundle:
    """One clique group per size in ``qs``, each covering about ``fraction`` of the nodes."""
    bundle = _as_bundle(source)
    n = bundle.graph.n
    ss = np.random.SeedSequence(seed)
    for q, child in zip(qs, ss.spawn(len(qs))):
        p = max(1, int(round(fraction * n / q)))
        bundle = inject_structural_cliques(bundle, p, q, int(child.generate_state(1)[0]))
    return bundle


def _contextual_plan(free: np.ndarray, n: int, count: int, k: int, seed: int):
    """Chosen outliers and their candidate sets; a pure function of the arguments."""
    rng = np.random.default_rng(seed)
    chosen = rng.choice(free, size=count, replace=False)
    candidates = np.stack([rng.choice(n, size=k, replace=False) for _ in range(count)]) \
        if count else np.empty((0, k), dtype=np.int64)
    return chosen, candidates


def pairwise_distance(x: np.ndarray, rows: np.ndarray, distance: str) -> np.ndarray:
    """Distances from vector ``x`` to each row of ``rows``."""
    if distance == "euclidean":
        return np.linalg.norm(rows - x, axis=1)
    if distance == "cosine":
        nx = np.linalg.norm(x)
        nr = np.linalg.norm(rows, axis=1)
        denom = nx * nr
        sim = np.divide(rows @ x, denom, out=np.zeros(len(rows)), where=denom > 0)
        return 1.0 - sim
    raise InjectionError(f"unknown distance {distance!r}")


def inject_contextual(source, count: int, k: int = 50, distance: str = "euclidean",
                      seed: int = 0) -> DatasetBundle:
    """Overwrite ``count`` nodes' attributes with their farthest of ``k`` random candidates.

    Candidates are drawn from all nodes of the input graph and compared using the
    original attribute matrix.
    """
    bundle = _as_bundle(source)
    g = bundle.graph
    if k < 1 or k > g.n:
        raise InjectionError(f"candidate set size k={k} outside [1, {g.n}]")
    if distance not in DISTANCES:
        raise InjectionError(f"unknown distance {distance!r}")
    free = _free_nodes(bundle)
    if count < 0 or count > len(free):
        raise InjectionError(f"cannot choose {count} contextual outliers from {len(free)} free nodes")
    chosen, candidates = _contextual_plan(free, g.n, count, k, seed)
    X = g.X
    sources = np.empty(count, dtype=np.int64)
    for t, (i, cand) in enumerate(zip(chosen, candidates)):
        xi = X[i].toarray().ravel()
        dist = pairwise_distance(xi, X[cand].toarray(), distance)
        sources[t] = cand[int(np.argmax(dist))]
    rows = np.arange(g.n)
    rows[chosen] = sources
    graph = g.with_attributes(X[rows])
    truth = OutlierGroundTruth(contextual=chosen)
    step = {"kind": "contextual", "count": count, "k": k, "distance": distance, "seed": seed,
            "outliers": chosen.tolist(), "sources": sources.tolist()}
    return _extend(bundle, graph, truth, step)


def inject_standard(graph, params: InjectionParams) -> DatasetBundle:
    """Clique injection followed by the same number of contextual outliers."""
    params.validate(graph.n)
    s_str, s_ctx = np.random.SeedSequence(params.seed).spawn(2)
    b = inject_structural_cliques(graph, params.p, params.q, int(s_str.generate_state(1)[0]))
    b = inject_contextual(b, params.p * params.q, params.k, params.distance, int(s_ctx.generate_state(1)[0]))
    b.provenance["params"] = asdict(params)
    return b


def inject_community_swap(source, labels=None, fraction: float = 0.1, seed: int = 0) -> DatasetBundle:
    """Rewire ``floor(fraction * n)`` nodes to random neighbours from other classes.

    Each chosen node drops all of its edges and receives as many new neighbours,
    sampled without replacement from non-outlier nodes whose class differs from
    its own. Swapped-in neighbours are restricted to non-outliers so every
    outlier keeps its original degree exactly.
    """
    bundle = _as_bundle(source)
    g = bundle.graph
    labels = g.class_labels if labels is None else np.asarray(labels)
    if labels is None:
        raise InjectionError("community swap needs class labels")
    if len(np.unique(labels)) < 2:
        raise InjectionError("community swap needs at least two classes")
    count = int(np.floor(fraction * g.n))
    free = _free_nodes(bundle)
    if count > len(free):
        raise InjectionError("not enough free nodes")
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(free, size=count, replace=False))
    is_out = np.zeros(g.n, dtype=bool)
    is_out[chosen] = True
    deg = g.degrees
    keep = ~(is_out[g.edges[:, 0]] | is_out[g.edges[:, 1]])
    new_edges = [g.edges[keep]]
    pool_ok = ~is_out
    for i in chosen:
        pool = np.flatnonzero(pool_ok & (labels != labels[i]))
        if deg[i] > len(pool):
            raise InjectionError(f"node {i} has degree {deg[i]} but only {len(pool)} other-class nodes")
        nbrs = rng.choice(pool, size=deg[i], replace=False)
        new_edges.append(np.stack([np.full(deg[i], i), nbrs], axis=1))
    graph = g.with_edges(np.concatenate(new_edges))
    truth = OutlierGroundTruth(structural=chosen, groups={"swap": chosen} if count else {})
    step = {"kind": "swap", "fraction": fraction, "seed": seed}
    return _extend(bundle, graph, truth, step)
