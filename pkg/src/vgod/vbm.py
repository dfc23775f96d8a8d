"""Variance-based model: neighbour-variance structural scores trained contrastively."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import ParamStore, Tensor
from .graph import AttributedGraph
from .layers import neighbor_variance


@dataclass(frozen=True)
class VbmConfig:
    hidden: int = 128
    lr: float = 0.005
    epochs: int = 10
    self_loop: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.hidden <= 0:
            raise ValueError("hidden dimension must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")


@dataclass
class VbmModel:
    config: VbmConfig
    in_dim: int
    store: ParamStore
    history: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)

    @classmethod
    def init(cls, in_dim: int, config: VbmConfig) -> "VbmModel":
        rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
        store = ParamStore()
        store.add("W", ag.glorot(rng, in_dim, config.hidden))
        store.add("b", np.zeros(config.hidden))
        return cls(config, in_dim, store)

    def save(self, path) -> None:
        ag.save_checkpoint(path, self.store, {"model": "vbm", "in_dim": self.in_dim, **asdict(self.config)})

    @classmethod
    def load(cls, path) -> "VbmModel":
        store, cfg = ag.load_checkpoint(path)
        if cfg.pop("model", None) != "vbm":
            raise ValueError(f"{path} is not a VBM checkpoint")
        in_dim = cfg.pop("in_dim")
        return cls(VbmConfig(**cfg), in_dim, store)


@dataclass(frozen=True)
class NegativeGraph:
    """Per-node negative neighbour lists in CSR form (``indptr``, ``targets``)."""

    indptr: np.ndarray
    targets: np.ndarray

    @property
    def n(self) -> int:
        return len(self.indptr) - 1

    def neighbors(self, i: int) -> np.ndarray:
        return self.targets[self.indptr[i]:self.indptr[i + 1]]

    def edge_index(self, self_loops: bool = False):
        n = self.n
        dst = np.repeat(np.arange(n), np.diff(self.indptr))
        src = self.targets
        if self_loops:
            src = np.concatenate([src, np.arange(n)])
            dst = np.concatenate([dst, np.arange(n)])
        return src, dst


class NegativeSamplingError(RuntimeError):
    pass


def sample_negative_graph(graph: AttributedGraph, seed) -> NegativeGraph:
    """For each node draw |N_i| distinct non-neighbours (excluding itself) uniformly.

    Invalid draws are redrawn; a node that needs more than 100 * |N_i| draws
    raises :class:`NegativeSamplingError`.
    """
    n = graph.n
    deg = graph.degrees
    infeasible = np.flatnonzero(n - 1 - deg < deg)
    if len(infeasible):
        raise NegativeSamplingError(
            f"node {infeasible[0]} has degree {deg[infeasible[0]]}, too dense for negative sampling")
    rng = np.random.default_rng(seed)
    owner = np.repeat(np.arange(n, dtype=np.int64), deg)
    cand = rng.integers(0, n, size=len(owner))
    draws = deg.astype(np.int64).copy()
    src, dst = graph.edge_index()
    existing = np.sort(dst * n + src)
    cap = 100 * deg
    while True:
        keys = owner * n + cand
        bad = cand == owner
        pos = np.searchsorted(existing, keys)
        pos[pos == len(existing)] = 0
        if len(existing):
            bad |= existing[pos] == keys
        _, first = np.unique(keys, return_index=True)
        dup = np.ones(len(keys), dtype=bool)
        dup[first] = False
        bad |= dup
        if not bad.any():
            break
        draws += np.bincount(owner[bad], minlength=n)
        over = np.flatnonzero(draws > cap)
        if len(over):
            raise NegativeSamplingError(f"node {over[0]} exceeded {cap[over[0]]} sampling attempts")
        cand[bad] = rng.integers(0, n, size=int(bad.sum()))
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    order = np.lexsort((cand, owner))
    return NegativeGraph(indptr, cand[order])


def vbm_embed(model: VbmModel, X) -> Tensor:
    """Row-normalised linear embedding."""
    if X.shape[1] != model.in_dim:
        raise ValueError(f"attribute dimension {X.shape[1]} != model input {model.in_dim}")
    return ag.row_l2_normalize(ag.linear(X, model.store["W"], model.store["b"]))


def vbm_loss(model: VbmModel, graph: AttributedGraph, negative: NegativeGraph) -> Tensor:
    """Mean over nodes of (variance over neighbours) - (variance over negative neighbours)."""
    h = vbm_embed(model, graph.X)
    sl = model.config.self_loop
    pos = neighbor_variance(h, graph, sl)
    neg = neighbor_variance(h, graph, sl, edges=negative.edge_index(sl))
    return ag.mean_all(ag.sub(pos, neg))


def vbm_score(model: VbmModel, graph: AttributedGraph) -> np.ndarray:
    with ag.no_grad():
        h = vbm_embed(model, graph.X)
        return neighbor_variance(h, graph, model.config.self_loop).value.copy()


def vbm_train(graph: AttributedGraph, config: VbmConfig, callback=None) -> VbmModel:
    """Full-batch training: one fresh negative graph and one Adam step per epoch.

    ``callback(epoch, model)`` runs after initialisation (epoch 0) and after every
    epoch; it is how the epoch-trend experiment observes scores.
    """
    model = VbmModel.init(graph.d, config)
    neg_seeds = np.random.SeedSequence(config.seed).spawn(2)[1].spawn(max(config.epochs, 1))
    if callback is not None:
        callback(0, model)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        negative = sample_negative_graph(graph, neg_seeds[epoch - 1])
        model.store.zero_grad()
        loss = vbm_loss(model, graph, negative)
        ag.backward(loss)
        ag.adam_step(model.store, config.lr)
        model.epoch_seconds.append(time.perf_counter() - t0)
        model.history.append(float(loss.value))
        if callback is not None:
            callback(epoch, model)
    return model
