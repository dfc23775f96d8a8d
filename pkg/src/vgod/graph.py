"""Attributed graphs: data model, dataset directories, SBM generation, statistics."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    pass


def _canonical_edges(edges: np.ndarray) -> tuple[np.ndarray, int]:
    """Return (sorted unique u<v pairs, number of dropped input rows)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    loops = edges[:, 0] == edges[:, 1]
    e = edges[~loops]
    e = np.sort(e, axis=1)
    if len(e):
        e = np.unique(e, axis=0)
    dropped = len(edges) - len(e)
    return e.reshape(-1, 2), int(dropped)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected attributed network.

    ``edges`` holds each undirected edge once as a sorted pair (u < v); ``X`` is
    a CSR matrix with one row per node. Instances are treated as immutable.
    """

    n: int
    edges: np.ndarray
    X: sp.csr_matrix
    class_labels: np.ndarray | None = None
    dropped_edges: int = field(default=0, compare=False)

    @classmethod
    def from_edges(cls, n, edges, X, class_labels=None) -> "AttributedGraph":
        edges, dropped = _canonical_edges(edges)
        if len(edges) and (edges.min() < 0 or edges.max() >= n):
            raise GraphFormatError(f"edge endpoint outside [0, {n})")
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
        else:
            X = sp.csr_matrix(np.asarray(X, dtype=np.float64).reshape(n, -1))
        X.sum_duplicates()
        X.sort_indices()
        if X.shape[0] != n:
            raise GraphFormatError(f"attribute matrix has {X.shape[0]} rows, expected {n}")
        if not np.all(np.isfinite(X.data)):
            raise GraphFormatError("non-finite attribute value")
        if class_labels is not None:
            class_labels = np.asarray(class_labels, dtype=np.int64)
            if class_labels.shape != (n,):
                raise GraphFormatError("class_labels must have one entry per node")
        for arr in (edges, X.data, X.indices, X.indptr):
            arr.setflags(write=False)
        return cls(n=int(n), edges=edges, X=X, class_labels=class_labels, dropped_edges=dropped)

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        u, v = self.edges[:, 0], self.edges[:, 1]
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=self.n), out=indptr[1:])
        return indptr, dst

    @cached_property
    def degrees(self) -> np.ndarray:
        indptr, _ = self._csr
        return np.diff(indptr)

    def neighbors(self, i: int) -> np.ndarray:
        indptr, idx = self._csr
        return idx[indptr[i]:indptr[i + 1]]

    def edge_index(self, self_loops: bool = False) -> tuple[np.ndarray, np.ndarray]:
        """Directed message edges (src, dst), both directions, grouped by dst."""
        indptr, idx = self._csr
        dst = np.repeat(np.arange(self.n), np.diff(indptr))
        src = idx
        if self_loops:
            loops = np.arange(self.n)
            src = np.concatenate([src, loops])
            dst = np.concatenate([dst, loops])
            order = np.argsort(dst, kind="stable")
            src, dst = src[order], dst[order]
        return src, dst

    def adjacency(self) -> sp.csr_matrix:
        indptr, idx = self._csr
        return sp.csr_matrix((np.ones(len(idx)), idx, indptr), shape=(self.n, self.n))

    def dense_x(self) -> np.ndarray:
        return self.X.toarray()

    def row(self, i: int) -> np.ndarray:
        return self.X[i].toarray().ravel()

    def with_attributes(self, X) -> "AttributedGraph":
        g = AttributedGraph.from_edges(self.n, self.edges, X, self.class_labels)
        return g

    def with_edges(self, edges) -> "AttributedGraph":
        return AttributedGraph.from_edges(self.n, edges, self.X, self.class_labels)

    def permute(self, perm: np.ndarray) -> "AttributedGraph":
        """Relabel node ``i`` as ``perm[i]``."""
        perm = np.asarray(perm)
        inv = np.argsort(perm)
        labels = None if self.class_labels is None else self.class_labels[inv]
        return AttributedGraph.from_edges(self.n, perm[self.edges], self.X[inv], labels)

    def same_as(self, other: "AttributedGraph") -> bool:
        if self.n != other.n or self.X.shape != other.X.shape:
            return False
        if not np.array_equal(self.edges, other.edges):
            return False
        if (self.X != other.X).nnz:
            return False
        a, b = self.class_labels, other.class_labels
        if (a is None) != (b is None):
            return False
        return a is None or np.array_equal(a, b)


@dataclass(frozen=True)
class OutlierGroundTruth:
    structural: frozenset = frozenset()
    contextual: frozenset = frozenset()
    groups: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "structural", frozenset(int(i) for i in self.structural))
        object.__setattr__(self, "contextual", frozenset(int(i) for i in self.contextual))
        object.__setattr__(self, "groups", {k: frozenset(int(i) for i in v) for k, v in self.groups.items()})
        if self.structural & self.contextual:
            raise ValueError("structural and contextual outlier sets overlap")

    @property
    def all(self) -> frozenset:
        return self.structural | self.contextual

    def kind_of(self, i: int) -> str | None:
        if i in self.structural:
            return "str"
        if i in self.contextual:
            return "ctx"
        return None

    def group_of(self, i: int) -> str | None:
        for tag, members in self.groups.items():
            if i in members:
                return tag
        return None

    def validate(self, n: int) -> None:
        if any(i < 0 or i >= n for i in self.all):
            raise ValueError("outlier id out of range")
        for tag, members in self.groups.items():
            if not members <= self.all:
                raise ValueError(f"group {tag!r} is not a subset of the outlier set")
        tags = list(self.groups.values())
        for i in range(len(tags)):
            for j in range(i + 1, len(tags)):
                if tags[i] & tags[j]:
                    raise ValueError("outlier groups overlap")

    def merge(self, other: "OutlierGroundTruth") -> "OutlierGroundTruth":
        groups = dict(self.groups)
        for k, v in other.groups.items():
            groups[k] = groups.get(k, frozenset()) | v
        return OutlierGroundTruth(self.structural | other.structural,
                                  self.contextual | other.contextual, groups)

    def mask(self, n: int, which: str = "all") -> np.ndarray:
        ids = {"all": self.all, "str": self.structural, "ctx": self.contextual}[which]
        out = np.zeros(n, dtype=bool)
        out[list(ids)] = True
        return out


@dataclass(frozen=True)
class DatasetBundle:
    graph: AttributedGraph
    truth: OutlierGroundTruth
    provenance: dict = field(default_factory=dict)


# --------------------------------------------------------------------- file I/O

def _read_edges(path: Path) -> np.ndarray:
    rows = []
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if len(parts) < 2:
                raise GraphFormatError(f"{path}:{lineno}: expected two node ids")
            try:
                rows.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: non-integer node id") from None
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def _read_features(path: Path) -> sp.csr_matrix:
    with open(path, encoding="ascii") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise GraphFormatError(f"{path}: first line must be 'n d'")
        n, d = int(header[0]), int(header[1])
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if len(lines) != n:
        raise GraphFormatError(f"{path}: {len(lines)} feature rows, expected {n}")
    sparse = any(":" in ln for ln in lines) or (d > 0 and all(not ln.strip() for ln in lines))
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    if sparse:
        for i, ln in enumerate(lines):
            for tok in ln.split():
                j, _, v = tok.partition(":")
                j = int(j)
                if not 0 <= j < d:
                    raise GraphFormatError(f"{path}: row {i} column {j} outside [0, {d})")
                indices.append(j)
                data.append(float(v))
            indptr.append(len(indices))
        return sp.csr_matrix((np.array(data, dtype=np.float64), np.array(indices, dtype=np.int64),
                              np.array(indptr)), shape=(n, d))
    dense = np.zeros((n, d))
    for i, ln in enumerate(lines):
        vals = ln.split()
        if len(vals) != d:
            raise GraphFormatError(f"{path}: row {i} has {len(vals)} values, expected {d}")
        dense[i] = [float(v) for v in vals]
    return sp.csr_matrix(dense)


def read_outliers(path: Path) -> OutlierGroundTruth:
    structural, contextual, groups = set(), set(), {}
    with open(path, encoding="ascii") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 2:
                raise GraphFormatError(f"{path}:{lineno}: expected node_id<TAB>kind<TAB>group")
            i, kind = int(parts[0]), parts[1]
            group = parts[2] if len(parts) > 2 else "-"
            if kind == "str":
                structural.add(i)
            elif kind == "ctx":
                contextual.add(i)
            else:
                raise GraphFormatError(f"{path}:{lineno}: unknown outlier kind {kind!r}")
            if group and group != "-":
                groups.setdefault(group, set()).add(i)
    return OutlierGroundTruth(structural, contextual, groups)


def write_outliers(truth: OutlierGroundTruth, path: Path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for i in sorted(truth.all):
            fh.write(f"{i}\t{truth.kind_of(i)}\t{truth.group_of(i) or '-'}\n")


def load_graph(directory) -> AttributedGraph:
    """Read a dataset directory (``edges.txt``, ``features.txt``, optional ``classes.txt``)."""
    directory = Path(directory)
    for name in ("edges.txt", "features.txt"):
        if not (directory / name).is_file():
            raise FileNotFoundError(directory / name)
    X = _read_features(directory / "features.txt")
    n = X.shape[0]
    edges = _read_edges(directory / "edges.txt")
    if len(edges) and (edges.min() < 0 or edges.max() >= n):
        raise GraphFormatError(f"edge endpoint outside [0, {n})")
    labels = None
    if (directory / "classes.txt").is_file():
        labels = np.loadtxt(directory / "classes.txt", dtype=np.int64, ndmin=1)
        if labels.shape != (n,):
            raise GraphFormatError("classes.txt must have one line per node")
    g = AttributedGraph.from_edges(n, edges, X, labels)
    if g.dropped_edges:
        log.warning("%s: dropped %d duplicate/self-loop edge rows", directory, g.dropped_edges)
    return g


def load_bundle(directory) -> DatasetBundle:
    directory = Path(directory)
    g = load_graph(directory)
    truth = OutlierGroundTruth()
    if (directory / "outliers.txt").is_file():
        truth = read_outliers(directory / "outliers.txt")
        truth.validate(g.n)
    prov = {"source": str(directory)}
    if (directory / "provenance.json").is_file():
        prov = json.loads((directory / "provenance.json").read_text())
    return DatasetBundle(g, truth, prov)


def save_graph(graph: AttributedGraph, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    with open(directory / "edges.txt", "w", encoding="ascii") as fh:
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")
    X = graph.X
    with open(directory / "features.txt", "w", encoding="ascii") as fh:
        fh.write(f"{graph.n} {graph.d}\n")
        for i in range(graph.n):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            fh.write(" ".join(f"{j}:{float(v)!r}" for j, v in zip(X.indices[lo:hi], X.data[lo:hi])))
            fh.write("\n")
    if graph.class_labels is not None:
        np.savetxt(directory / "classes.txt", graph.class_labels, fmt="%d")


def save_bundle(bundle: DatasetBundle, directory) -> None:
    directory = Path(directory)
    save_graph(bundle.graph, directory)
    write_outliers(bundle.truth, directory / "outliers.txt")
    (directory / "provenance.json").write_text(json.dumps(bundle.provenance, indent=2, default=_jsonable))


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, (np.ndarray, frozenset, set)):
        return sorted(o.tolist() if isinstance(o, np.ndarray) else o)
    raise TypeError(type(o))


def load_linqs_citation(content_path, cites_path) -> AttributedGraph:
    """Convert the raw LINQS ``*.content`` / ``*.cites`` pair (e.g. Cora) to a graph.

    Document ids are remapped to 0..n-1 in file order; citations to unknown ids are skipped.
    """
    ids, rows, labels = {}, [], []
    classes: dict[str, int] = {}
    with open(content_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            ids[parts[0]] = len(ids)
            rows.append([float(v) for v in parts[1:-1]])
            labels.append(classes.setdefault(parts[-1], len(classes)))
    edges = []
    with open(cites_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 2 and parts[0] in ids and parts[1] in ids:
                edges.append((ids[parts[0]], ids[parts[1]]))
    return AttributedGraph.from_edges(len(ids), np.array(edges), sp.csr_matrix(np.array(rows)), labels)


# ------------------------------------------------------------------ generation

def _sample_pairs(rng, size_a, size_b, same_block, p):
    """Sample a G(n,p) edge set between two blocks as local index pairs."""
    total = size_a * (size_a - 1) // 2 if same_block else size_a * size_b
    if total == 0 or p == 0:
        return np.empty((0, 2), dtype=np.int64)
    k = rng.binomial(total, p)
    flat = rng.choice(total, size=k, replace=False) if k < total else np.arange(total)
    flat = np.sort(flat).astype(np.int64)
    if not same_block:
        return np.stack([flat // size_b, flat % size_b], axis=1)
    # row-major upper triangle: row i owns indices [i*s - i(i+1)/2, ... )
    s = size_a
    i = np.floor(((2 * s - 1) - np.sqrt((2 * s - 1) ** 2 - 8.0 * flat)) / 2).astype(np.int64)
    start = i * s - i * (i + 1) // 2
    over = flat < start
    i[over] -= 1
    start = i * s - i * (i + 1) // 2
    under = flat >= start + (s - 1 - i)
    i[under] += 1
    start = i * s - i * (i + 1) // 2
    j = flat - start + i + 1
    return np.stack([i, j], axis=1)


def generate_sbm(n: int, communities: int, p_in: float, p_out: float, attr_dim: int,
                 attr_sep: float, seed: int) -> AttributedGraph:
    """Stochastic block model with Gaussian attributes centred per community.

    Nodes are split into ``communities`` near-equal contiguous blocks. Community
    means sit on scaled basis directions so any two means are ``attr_sep`` apart.
    """
    if not (0 <= p_out < p_in <= 1):
        raise ValueError("need 0 <= p_out < p_in <= 1")
    if communities < 2:
        raise ValueError("need at least two communities")
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(communities), [len(b) for b in np.array_split(np.arange(n), communities)])
    starts = np.searchsorted(labels, np.arange(communities))
    sizes = np.bincount(labels, minlength=communities)
    parts = []
    for a in range(communities):
        for b in range(a, communities):
            pairs = _sample_pairs(rng, sizes[a], sizes[b], a == b, p_in if a == b else p_out)
            parts.append(np.stack([pairs[:, 0] + starts[a], pairs[:, 1] + starts[b]], axis=1))
    edges = np.concatenate(parts) if parts else np.empty((0, 2), dtype=np.int64)
    if attr_dim >= communities:
        means = np.zeros((communities, attr_dim))
        means[np.arange(communities), np.arange(communities)] = attr_sep / math.sqrt(2)
    else:
        dirs = rng.standard_normal((communities, attr_dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        means = dirs * attr_sep / math.sqrt(2)
    X = means[labels] + rng.standard_normal((n, attr_dim))
    return AttributedGraph.from_edges(n, edges, X, labels)


# ------------------------------------------------------------------ statistics

def compute_homophily(graph: AttributedGraph, labels=None) -> float:
    """Class-adjusted edge homophily: 0 for label-independent edges, 1 for pure."""
    labels = graph.class_labels if labels is None else np.asarray(labels)
    if labels is None or len(labels) != graph.n:
        raise ValueError("labels required for every node")
    if graph.m == 0:
        raise ValueError("homophily undefined on a graph without edges")
    h_edge = np.mean(labels[graph.edges[:, 0]] == labels[graph.edges[:, 1]])
    _, counts = np.unique(labels, return_counts=True)
    p = counts / counts.sum()
    chance = float(np.sum(p ** 2))
    if chance >= 1.0:
        raise ValueError("homophily undefined with a single class")
    return float((h_edge - chance) / (1.0 - chance))


def subset_attribute_variance(graph: AttributedGraph, nodes) -> float:
    """Sum over attribute dimensions of the population variance within ``nodes``."""
    nodes = np.fromiter(nodes, dtype=np.int64) if not isinstance(nodes, np.ndarray) else nodes
    if len(nodes) == 0:
        raise ValueError("empty node set")
    sub = graph.X[nodes].toarray()
    return float(np.var(sub, axis=0).sum())
