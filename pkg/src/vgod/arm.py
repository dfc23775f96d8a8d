"""Attribute reconstruction model: encoder, GNN stack, decoder, squared-error scores."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp

from . import autograd as ag
from .autograd import ParamStore, Tensor
from .graph import AttributedGraph
from .layers import KINDS, GnnLayerConfig, apply_layer, init_layer


@dataclass(frozen=True)
class ArmConfig:
    hidden: int = 128
    lr: float = 0.005
    epochs: int = 100
    layers: int = 2
    gnn: str = "gat"
    row_normalize_X: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("ARM needs at least one GNN layer")
        if self.gnn not in KINDS:
            raise ValueError(f"unknown GNN backbone {self.gnn!r}")
        if self.hidden <= 0 or self.epochs < 0:
            raise ValueError("hidden must be positive and epochs non-negative")

    def layer_configs(self) -> list[GnnLayerConfig]:
        # ReLU between layers, identity after the last one
        return [GnnLayerConfig(self.gnn, self.hidden, self.hidden,
                               "relu" if i < self.layers - 1 else "none")
                for i in range(self.layers)]


@dataclass
class ArmModel:
    config: ArmConfig
    in_dim: int
    store: ParamStore
    history: list = field(default_factory=list)
    epoch_seconds: list = field(default_factory=list)

    @classmethod
    def init(cls, in_dim: int, config: ArmConfig) -> "ArmModel":
        rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(1)[0])
        store = ParamStore()
        store.add("enc.W", ag.glorot(rng, in_dim, config.hidden))
        store.add("enc.b", np.zeros(config.hidden))
        for i, cfg in enumerate(config.layer_configs()):
            init_layer(store, f"gnn{i}", cfg, rng)
        store.add("dec.W", ag.glorot(rng, config.hidden, in_dim))
        store.add("dec.b", np.zeros(in_dim))
        return cls(config, in_dim, store)

    def save(self, path) -> None:
        ag.save_checkpoint(path, self.store, {"model": "arm", "in_dim": self.in_dim, **asdict(self.config)})

    @classmethod
    def load(cls, path) -> "ArmModel":
        store, cfg = ag.load_checkpoint(path)
        if cfg.pop("model", None) != "arm":
            raise ValueError(f"{path} is not an ARM checkpoint")
        in_dim = cfg.pop("in_dim")
        return cls(ArmConfig(**cfg), in_dim, store)


def prepare_attributes(graph: AttributedGraph, row_normalize: bool) -> sp.csr_matrix:
    """Attribute matrix as seen by ARM (rows L1-normalised when requested)."""
    X = graph.X
    if not row_normalize:
        return X
    s = np.asarray(abs(X).sum(axis=1)).ravel()
    inv = np.divide(1.0, s, out=np.zeros_like(s), where=s > 0)
    return sp.csr_matrix(sp.diags(inv) @ X)


def arm_forward(model: ArmModel, graph: AttributedGraph, X=None) -> Tensor:
    X = prepare_attributes(graph, model.config.row_normalize_X) if X is None else X
    if X.shape[1] != model.in_dim:
        raise ValueError(f"attribute dimension {X.shape[1]} != model input {model.in_dim}")
    st = model.store
    z = ag.row_l2_normalize(ag.linear(X, st["enc.W"], st["enc.b"]))
    for i, cfg in enumerate(model.config.layer_configs()):
        z = apply_layer(z, graph, st, f"gnn{i}", cfg)
    return ag.linear(z, st["dec.W"], st["dec.b"])


def _row_errors(x_hat: Tensor, X) -> Tensor:
    target = X.toarray() if sp.issparse(X) else np.asarray(X)
    return ag.row_sum(ag.square(ag.sub(x_hat, ag.Tensor(target))))


def arm_loss(model: ArmModel, graph: AttributedGraph, X=None) -> Tensor:
    X = prepare_attributes(graph, model.config.row_normalize_X) if X is None else X
    return ag.mean_all(_row_errors(arm_forward(model, graph, X), X))


def recon_score(model: ArmModel, graph: AttributedGraph) -> np.ndarray:
    """Squared L2 reconstruction error per node."""
    X = prepare_attributes(graph, model.config.row_normalize_X)
    with ag.no_grad():
        return _row_errors(arm_forward(model, graph, X), X).value.copy()


def arm_train(graph: AttributedGraph, config: ArmConfig, callback=None) -> ArmModel:
    model = ArmModel.init(graph.d, config)
    X = prepare_attributes(graph, config.row_normalize_X)
    if callback is not None:
        callback(0, model)
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        model.store.zero_grad()
        loss = arm_loss(model, graph, X)
        ag.backward(loss)
        ag.adam_step(model.store, config.lr)
        model.epoch_seconds.append(time.perf_counter() - t0)
        model.history.append(float(loss.value))
        if callback is not None:
            callback(epoch, model)
    return model
