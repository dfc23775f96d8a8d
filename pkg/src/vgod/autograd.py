"""Small reverse-mode differentiation engine over float64 numpy arrays.

Only the operations the detectors need are provided; there is no general
broadcasting. Every op records its parents and a closure mapping the output
adjoint to parent adjoints; ``backward`` replays them in reverse topological
order.
"""
from __future__ import annotations

import contextlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

_GRAD_ENABLED = True
_EDGE_CHUNK = 1 << 16


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.value) if requires_grad else None
        self._parents: tuple = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, name={self.name!r})"

    def numpy(self) -> np.ndarray:
        return self.value

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0.0

    def backward(self):
        backward(self)

    # operator sugar for the common cases
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _lift(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(value, parents, backward_fn) -> Tensor:
    out = Tensor(value)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward_fn
    return out


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf."""
    if loss.value.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    order, seen, stack = [], set(), [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    adj = {id(loss): np.ones_like(loss.value)}
    for node in reversed(order):
        g = adj.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad += g
            continue
        for p, pg in zip(node._parents, node._backward(g)):
            if pg is None or not p.requires_grad:
                continue
            if id(p) in adj:
                adj[id(p)] = adj[id(p)] + pg
            else:
                adj[id(p)] = pg


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.shape != b.shape:
        raise ValueError(f"add: shape mismatch {a.shape} vs {b.shape}")
    return _result(a.value + b.value, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.shape != b.shape:
        raise ValueError(f"sub: shape mismatch {a.shape} vs {b.shape}")
    return _result(a.value - b.value, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.shape != b.shape:
        raise ValueError(f"mul: shape mismatch {a.shape} vs {b.shape}")
    return _result(a.value * b.value, (a, b), lambda g: (g * b.value, g * a.value))


def scale(a: Tensor, c: float) -> Tensor:
    return _result(a.value * c, (a,), lambda g: (g * c,))


def square(a: Tensor) -> Tensor:
    return _result(a.value ** 2, (a,), lambda g: (2.0 * a.value * g,))


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    return _result(a.value * mask, (a,), lambda g: (g * mask,))


def leaky_relu(a: Tensor, slope: float = 0.2) -> Tensor:
    factor = np.where(a.value > 0, 1.0, slope)
    return _result(a.value * factor, (a,), lambda g: (g * factor,))


def activation(a: Tensor, kind: str) -> Tensor:
    if kind == "relu":
        return relu(a)
    if kind == "leaky_relu":
        return leaky_relu(a, 0.2)
    if kind in ("none", None):
        return a
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------- reductions

def sum_all(a: Tensor) -> Tensor:
    return _result(np.array(a.value.sum()), (a,), lambda g: (np.full(a.shape, float(g)),))


def mean_all(a: Tensor) -> Tensor:
    size = a.value.size
    return _result(np.array(a.value.mean()), (a,), lambda g: (np.full(a.shape, float(g) / size),))


def row_sum(a: Tensor) -> Tensor:
    """(n, h) -> (n,)"""
    return _result(a.value.sum(axis=1), (a,), lambda g: (np.repeat(g[:, None], a.shape[1], axis=1),))


def column(v: Tensor) -> Tensor:
    """(n,) -> (n, 1)"""
    return _result(v.value[:, None], (v,), lambda g: (g[:, 0],))


def flatten(v: Tensor) -> Tensor:
    """(n, 1) -> (n,)"""
    if v.value.ndim != 2 or v.shape[1] != 1:
        raise ValueError(f"flatten expects shape (n, 1), got {v.shape}")
    return _result(v.value[:, 0], (v,), lambda g: (g[:, None],))


# ---------------------------------------------------------------- linear maps

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _lift(a), _lift(b)
    if a.value.ndim != 2 or b.value.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")
    return _result(a.value @ b.value, (a, b), lambda g: (g @ b.value.T, a.value.T @ g))


def matvec(a: Tensor, v: Tensor) -> Tensor:
    """(n, h) @ (h,) -> (n,)"""
    if a.value.ndim != 2 or v.value.ndim != 1 or a.shape[1] != v.shape[0]:
        raise ValueError(f"matvec: shape mismatch {a.shape} @ {v.shape}")
    return _result(a.value @ v.value, (a, v), lambda g: (np.outer(g, v.value), a.value.T @ g))


def add_bias(h: Tensor, b: Tensor) -> Tensor:
    if h.value.ndim != 2 or b.shape != (h.shape[1],):
        raise ValueError(f"add_bias: shape mismatch {h.shape} + {b.shape}")
    return _result(h.value + b.value, (h, b), lambda g: (g, g.sum(axis=0)))


def linear(X, W: Tensor, b: Tensor | None = None) -> Tensor:
    """``X @ W + b`` for dense Tensor or scipy-sparse (constant) ``X``."""
    if sp.issparse(X):
        if X.shape[1] != W.shape[0]:
            raise ValueError(f"linear: shape mismatch {X.shape} @ {W.shape}")
        Xc = X.tocsr()
        out = _result(np.asarray(Xc @ W.value), (W,), lambda g: (np.asarray(Xc.T @ g),))
    else:
        out = matmul(_lift(X), W)
    return out if b is None else add_bias(out, b)


def row_l2_normalize(h: Tensor, eps: float = 1e-12) -> Tensor:
    """Divide each row by ``max(||row||, eps)``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    norms = np.linalg.norm(h.value, axis=1)
    denom = np.maximum(norms, eps)
    y = h.value / denom[:, None]
    active = norms >= eps

    def bw(g):
        proj = np.einsum("ij,ij->i", g, y) * active
        return ((g - y * proj[:, None]) / denom[:, None],)

    return _result(y, (h,), bw)


# ---------------------------------------------------------------- graph ops

def _scatter_rows(g: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    if g.ndim == 1:
        return np.bincount(idx, weights=g, minlength=n)
    S = sp.csr_matrix((np.ones(len(idx)), (idx, np.arange(len(idx)))), shape=(n, len(idx)))
    return np.asarray(S @ g)


def _check_ids(idx: np.ndarray, n: int):
    if len(idx) and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"segment id outside [0, {n})")


def gather_rows(h: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    n = h.shape[0]
    _check_ids(idx, n)
    return _result(h.value[idx], (h,), lambda g: (_scatter_rows(g, idx, n),))


def segment_reduce(messages: Tensor, targets: np.ndarray, n: int, mode: str = "sum") -> Tensor:
    """Aggregate per-edge messages into per-node rows; empty segments give zeros."""
    targets = np.asarray(targets, dtype=np.int64)
    _check_ids(targets, n)
    counts = np.bincount(targets, minlength=n).astype(np.float64)
    total = _scatter_rows(messages.value, targets, n)
    if mode == "sum":
        return _result(total, (messages,), lambda g: (g[targets],))
    if mode == "mean":
        inv = np.divide(1.0, counts, out=np.zeros(n), where=counts > 0)
        shape = (-1,) + (1,) * (messages.value.ndim - 1)
        return _result(total * inv.reshape(shape), (messages,),
                       lambda g: (g[targets] * inv[targets].reshape(shape),))
    raise ValueError(f"unknown reduction {mode!r}")


def segment_softmax(logits: Tensor, targets: np.ndarray, n: int) -> Tensor:
    """Softmax of 1-D edge logits within each target's segment (max-shifted)."""
    targets = np.asarray(targets, dtype=np.int64)
    _check_ids(targets, n)
    counts = np.bincount(targets, minlength=n)
    if np.any(counts == 0):
        raise ValueError("segment_softmax: empty segment")
    mx = np.full(n, -np.inf)
    np.maximum.at(mx, targets, logits.value)
    ex = np.exp(logits.value - mx[targets])
    w = ex / np.bincount(targets, weights=ex, minlength=n)[targets]

    def bw(g):
        dot = np.bincount(targets, weights=w * g, minlength=n)
        return (w * (g - dot[targets]),)

    return _result(w, (logits,), bw)


def _edge_dot(a: np.ndarray, ia: np.ndarray, b: np.ndarray, ib: np.ndarray) -> np.ndarray:
    out = np.empty(len(ia))
    for lo in range(0, len(ia), _EDGE_CHUNK):
        hi = lo + _EDGE_CHUNK
        out[lo:hi] = np.einsum("ij,ij->i", a[ia[lo:hi]], b[ib[lo:hi]])
    return out


def spmm(weights, src: np.ndarray, dst: np.ndarray, h: Tensor) -> Tensor:
    """out[i] = sum over edges e with dst[e] == i of weights[e] * h[src[e]].

    ``weights`` may be a Tensor (differentiable) or a constant array.
    """
    w = _lift(weights)
    n = h.shape[0]
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    _check_ids(src, n)
    _check_ids(dst, n)
    S = sp.csr_matrix((w.value, (dst, src)), shape=(n, n))
    out = np.asarray(S @ h.value)

    def bw(g):
        gw = _edge_dot(g, dst, h.value, src) if w.requires_grad else None
        gh = np.asarray(S.T @ g) if h.requires_grad else None
        return (gw, gh)

    return _result(out, (w, h), bw)


# ---------------------------------------------------------------- parameters

def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


@dataclass
class ParamStore:
    """Named parameters plus Adam moment buffers."""

    params: dict = field(default_factory=dict)
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    def add(self, name: str, value) -> Tensor:
        t = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self.params[name] = t
        self.m[name] = np.zeros_like(t.value)
        self.v[name] = np.zeros_like(t.value)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self):
        return list(self.params)

    def zero_grad(self):
        for t in self.params.values():
            t.zero_grad()

    def snapshot(self) -> dict:
        return {k: t.value.copy() for k, t in self.params.items()}


def adam_step(store: ParamStore, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    store.step += 1
    bc1 = 1.0 - beta1 ** store.step
    bc2 = 1.0 - beta2 ** store.step
    for name, t in store.params.items():
        g = t.grad
        m, v = store.m[name], store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        t.value -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


# ---------------------------------------------------------------- verification

@dataclass
class GradcheckReport:
    max_rel_error: float
    per_param: dict
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def gradcheck(fn, params: list[Tensor], tol: float = 1e-6, step: float = 1e-6) -> GradcheckReport:
    """Compare analytic gradients of scalar ``fn()`` with central differences.

    Errors are normwise: for each parameter, ``max|analytic - numeric|`` divided
    by the largest gradient entry over *all* parameters (floored at 1e-12). A
    parameter whose true gradient vanishes is then judged against the scale of
    the whole gradient rather than against its own rounding noise.
    """
    for p in params:
        p.zero_grad()
    loss = fn()
    if not np.isfinite(loss.value).all():
        raise FloatingPointError("gradcheck: non-finite function value")
    backward(loss)
    pairs = []
    with no_grad():
        for p in params:
            analytic = p.grad.copy()
            numeric = np.zeros_like(p.value)
            flat = p.value.reshape(-1)
            nflat = numeric.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                fp = float(fn().value)
                flat[i] = orig - step
                fm = float(fn().value)
                flat[i] = orig
                if not (np.isfinite(fp) and np.isfinite(fm)):
                    raise FloatingPointError("gradcheck: non-finite function value")
                nflat[i] = (fp - fm) / (2 * step)
            pairs.append((analytic, numeric))
    for p in params:
        p.zero_grad()
    scale_ = max([1e-12] + [max(np.abs(a).max(initial=0), np.abs(nu).max(initial=0)) for a, nu in pairs])
    per_param = {}
    for k, (p, (a, nu)) in enumerate(zip(params, pairs)):
        per_param[p.name if p.name and p.name not in per_param else f"param{k}"] = \
            float(np.abs(a - nu).max(initial=0) / scale_)
    return GradcheckReport(max(per_param.values(), default=0.0), per_param, tol)


# ---------------------------------------------------------------- checkpoints

_MAGIC = b"VGODCKPT"


def save_checkpoint(path, store: ParamStore, config: dict | None = None) -> None:
    """Write ``MAGIC | u64 header length | JSON header | little-endian f64 payload``."""
    names = store.names()
    header = {
        "names": names,
        "shapes": [list(store[n].shape) for n in names],
        "config": config or {},
        "step": store.step,
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Q", len(raw)))
        fh.write(raw)
        for n in names:
            fh.write(np.ascontiguousarray(store[n].value, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ParamStore, dict]:
    data = Path(path).read_bytes()
    if data[:8] != _MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    (hlen,) = struct.unpack("<Q", data[8:16])
    header = json.loads(data[16:16 + hlen].decode("utf-8"))
    offset = 16 + hlen
    store = ParamStore()
    for name, shape in zip(header["names"], header["shapes"]):
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=offset).reshape(shape)
        offset += 8 * count
        store.add(name, arr.astype(np.float64))
    if offset != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    store.step = header.get("step", 0)
    return store, header["config"]
