"""Message-passing layers (GCN, GAT, GIN) and the parameter-free MeanConv / MinusConv."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import ParamStore, Tensor
from .graph import AttributedGraph

KINDS = ("gcn", "gat", "gin")


@dataclass(frozen=True)
class GnnLayerConfig:
    kind: str
    in_dim: int
    out_dim: int
    activation: str = "relu"
    gin_eps: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.in_dim <= 0 or self.out_dim <= 0:
            raise ValueError("layer dimensions must be positive")
        if self.activation not in ("relu", "leaky_relu", "none"):
            raise ValueError(f"unknown activation {self.activation!r}")


def init_layer(store: ParamStore, prefix: str, cfg: GnnLayerConfig, rng: np.random.Generator) -> None:
    store.add(f"{prefix}.W", ag.glorot(rng, cfg.in_dim, cfg.out_dim))
    store.add(f"{prefix}.b", np.zeros(cfg.out_dim))
    if cfg.kind == "gat":
        # a = [a_dst ; a_src] split so that a^T [Wh_i || Wh_j] = a_dst.Wh_i + a_src.Wh_j
        store.add(f"{prefix}.a_dst", ag.glorot(rng, cfg.out_dim, 1, shape=(cfg.out_dim,)))
        store.add(f"{prefix}.a_src", ag.glorot(rng, cfg.out_dim, 1, shape=(cfg.out_dim,)))


def gcn_coefficients(graph: AttributedGraph):
    src, dst = graph.edge_index(self_loops=True)
    deg = graph.degrees + 1.0
    return src, dst, 1.0 / np.sqrt(deg[src] * deg[dst])


def gcn_layer(h: Tensor, graph: AttributedGraph, store: ParamStore, prefix: str, cfg: GnnLayerConfig) -> Tensor:
    """sigma(A_hat H W + b) with A_hat = D~^-1/2 (A + I) D~^-1/2."""
    if h.shape[0] != graph.n:
        raise ValueError("feature rows do not match node count")
    src, dst, coef = gcn_coefficients(graph)
    z = ag.matmul(h, store[f"{prefix}.W"])
    out = ag.add_bias(ag.spmm(coef, src, dst, z), store[f"{prefix}.b"])
    return ag.activation(out, cfg.activation)


def gat_attention(z: Tensor, graph: AttributedGraph, store: ParamStore, prefix: str):
    src, dst = graph.edge_index(self_loops=True)
    s_dst = ag.matvec(z, store[f"{prefix}.a_dst"])
    s_src = ag.matvec(z, store[f"{prefix}.a_src"])
    logits = ag.leaky_relu(ag.add(ag.gather_rows(s_dst, dst), ag.gather_rows(s_src, src)), 0.2)
    return src, dst, ag.segment_softmax(logits, dst, graph.n)


def gat_layer(h: Tensor, graph: AttributedGraph, store: ParamStore, prefix: str, cfg: GnnLayerConfig) -> Tensor:
    """Single-head attention over N_i and the node itself."""
    if h.shape[0] != graph.n:
        raise ValueError("feature rows do not match node count")
    z = ag.matmul(h, store[f"{prefix}.W"])
    src, dst, alpha = gat_attention(z, graph, store, prefix)
    out = ag.add_bias(ag.spmm(alpha, src, dst, z), store[f"{prefix}.b"])
    return ag.activation(out, cfg.activation)


def gin_layer(h: Tensor, graph: AttributedGraph, store: ParamStore, prefix: str, cfg: GnnLayerConfig) -> Tensor:
    """sigma(Psi((A + (1 + eps) I) H)) with Psi linear."""
    if h.shape[0] != graph.n:
        raise ValueError("feature rows do not match node count")
    src, dst = graph.edge_index(self_loops=True)
    w = np.where(src == dst, 1.0 + cfg.gin_eps, 1.0)
    agg = ag.spmm(w, src, dst, h)
    out = ag.linear(agg, store[f"{prefix}.W"], store[f"{prefix}.b"])
    return ag.activation(out, cfg.activation)


LAYERS = {"gcn": gcn_layer, "gat": gat_layer, "gin": gin_layer}


def apply_layer(h, graph, store, prefix, cfg: GnnLayerConfig) -> Tensor:
    return LAYERS[cfg.kind](h, graph, store, prefix, cfg)


# --------------------------------------------------------- neighbour variance

def mean_weights(src: np.ndarray, dst: np.ndarray, n: int) -> np.ndarray:
    counts = np.bincount(dst, minlength=n).astype(np.float64)
    return 1.0 / counts[dst]


def neighbor_edges(graph: AttributedGraph, self_loop: bool):
    return graph.edge_index(self_loops=self_loop)


def mean_conv(h: Tensor, graph: AttributedGraph, self_loop: bool = False, edges=None) -> Tensor:
    """Row i becomes the mean of h_j over N_i (plus i itself when ``self_loop``).

    ``edges`` may override the neighbourhood with explicit (src, dst) arrays,
    e.g. a negative graph. Nodes with no neighbours get a zero row.
    """
    src, dst = neighbor_edges(graph, self_loop) if edges is None else edges
    out = ag.spmm(mean_weights(src, dst, h.shape[0]), src, dst, h)
    out.name = _mean_tag(self_loop)
    return out


def _mean_tag(self_loop: bool) -> str:
    return f"mean_conv(self_loop={bool(self_loop)})"


def minus_conv(h: Tensor, h_bar: Tensor, graph: AttributedGraph, self_loop: bool = False,
               edges=None) -> Tensor:
    """Per-node L1 norm of the neighbour variance around ``h_bar``.

    Uses ``mean_j ||h_j||^2 - ||h_bar_i||^2``, equal to the summed per-dimension
    variance when ``h_bar`` comes from :func:`mean_conv` on the same edges.
    Rounding can push the difference a hair below zero; it is clamped at 0.
    """
    if h_bar.name is not None and h_bar.name.startswith("mean_conv") and h_bar.name != _mean_tag(self_loop):
        raise ValueError(f"h_bar came from {h_bar.name}, but minus_conv got self_loop={self_loop}")
    src, dst = neighbor_edges(graph, self_loop) if edges is None else edges
    w = mean_weights(src, dst, h.shape[0])
    second_moment = ag.flatten(ag.spmm(w, src, dst, ag.column(ag.row_sum(ag.square(h)))))
    return ag.relu(ag.sub(second_moment, ag.row_sum(ag.square(h_bar))))


def neighbor_variance(h: Tensor, graph: AttributedGraph, self_loop: bool = False, edges=None) -> Tensor:
    return minus_conv(h, mean_conv(h, graph, self_loop, edges), graph, self_loop, edges)


def variance_direct(H: np.ndarray, graph: AttributedGraph, self_loop: bool = False) -> np.ndarray:
    """Reference evaluation straight from the definitions, one node at a time."""
    out = np.zeros(graph.n)
    for i in range(graph.n):
        nbrs = list(graph.neighbors(i)) + ([i] if self_loop else [])
        if not nbrs:
            continue
        rows = H[nbrs]
        mean = rows.mean(axis=0)
        out[i] = np.sum(np.mean((rows - mean) ** 2, axis=0))
    return out
