import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import checks
from vgod import autograd as ag
from vgod.autograd import ParamStore, Tensor
from vgod.graph import AttributedGraph
from vgod.layers import (GnnLayerConfig, apply_layer, init_layer, mean_conv, minus_conv, neighbor_variance,
                         variance_direct)


def identity_layer(kind, d, activation="none"):
    st_ = ParamStore()
    cfg = GnnLayerConfig(kind, d, d, activation=activation)
    init_layer(st_, "l", cfg, np.random.default_rng(0))
    st_["l.W"].value[...] = np.eye(d)
    st_["l.b"].value[...] = 0.0
    if kind == "gat":
        st_["l.a_dst"].value[...] = 0.0
        st_["l.a_src"].value[...] = 0.0
    return st_, cfg


def graph(n, edges, d=2):
    return AttributedGraph.from_edges(n, np.asarray(edges).reshape(-1, 2), np.zeros((n, d)))


def test_gcn_isolated_nodes_identity():
    st_, cfg = identity_layer("gcn", 2)
    H = Tensor(np.random.default_rng(0).standard_normal((2, 2)))
    assert np.allclose(apply_layer(H, graph(2, []), st_, "l", cfg).value, H.value)


def test_gcn_single_edge():
    st_, cfg = identity_layer("gcn", 2)
    out = apply_layer(Tensor(np.eye(2)), graph(2, [(0, 1)]), st_, "l", cfg).value
    assert np.allclose(out, [[0.5, 0.5], [0.5, 0.5]])


def test_gat_zero_attention_is_mean_over_closed_neighbourhood():
    rng = np.random.default_rng(4)
    g = checks.random_graph(rng, n=15, d=3)
    st_, cfg = identity_layer("gat", 3)
    H = Tensor(rng.standard_normal((15, 3)))
    out = apply_layer(H, g, st_, "l", cfg).value
    assert np.allclose(out, mean_conv(H, g, self_loop=True).value, atol=1e-12)


def test_gin_examples():
    st_, cfg = identity_layer("gin", 2)
    H = Tensor(np.eye(2))
    assert np.allclose(apply_layer(H, graph(2, []), st_, "l", cfg).value, np.eye(2))
    assert np.allclose(apply_layer(H, graph(2, [(0, 1)]), st_, "l", cfg).value, [[1, 1], [1, 1]])


def test_layer_config_validation():
    with pytest.raises(ValueError):
        GnnLayerConfig("sage", 2, 2)
    with pytest.raises(ValueError):
        GnnLayerConfig("gcn", 0, 2)
    with pytest.raises(ValueError):
        GnnLayerConfig("gcn", 2, 2, activation="tanh")


@pytest.mark.parametrize("kind", ["gcn", "gat", "gin"])
def test_layers_permutation_equivariant(kind):
    rng = np.random.default_rng(7)
    g = checks.random_graph(rng, n=20, d=3)
    st_ = ParamStore()
    cfg = GnnLayerConfig(kind, 3, 4)
    init_layer(st_, "l", cfg, rng)
    H = rng.standard_normal((20, 3))
    perm = rng.permutation(20)
    inv = np.argsort(perm)
    a = apply_layer(Tensor(H), g, st_, "l", cfg).value
    b = apply_layer(Tensor(H[inv]), g.permute(perm), st_, "l", cfg).value
    assert np.allclose(b[perm], a, atol=1e-12)


def test_layer_rejects_wrong_rows():
    st_, cfg = identity_layer("gat", 2)
    with pytest.raises(ValueError):
        apply_layer(Tensor(np.zeros((3, 2))), graph(2, []), st_, "l", cfg)


# ---------------------------------------------------------------- mean / minus conv

def test_mean_conv_examples():
    g = graph(3, [(0, 1), (0, 2)])
    H = Tensor([[9.0, 9.0], [1.0, 0.0], [0.0, 1.0]])
    out = mean_conv(H, g).value
    assert np.allclose(out[0], [0.5, 0.5])
    assert np.allclose(out[1], [9, 9])  # single neighbour
    iso = graph(2, [])
    assert np.allclose(mean_conv(Tensor([[1.0, 2.0], [3.0, 4.0]]), iso, self_loop=True).value, [[1, 2], [3, 4]])


def test_minus_conv_examples():
    g = graph(3, [(0, 1), (0, 2)])
    same = Tensor([[0.0, 0.0], [1.0, 2.0], [1.0, 2.0]])
    assert neighbor_variance(same, g).value[0] == 0.0
    orth = Tensor([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert neighbor_variance(orth, g).value[0] == pytest.approx(0.5, abs=1e-15)


def test_minus_conv_isolated_without_self_loop_is_zero():
    assert np.array_equal(neighbor_variance(Tensor(np.ones((3, 2))), graph(3, [])).value, np.zeros(3))


def test_minus_conv_rejects_mismatched_mean():
    g = graph(3, [(0, 1)])
    H = Tensor(np.eye(3)[:, :2])
    with pytest.raises(ValueError, match="self_loop"):
        minus_conv(H, mean_conv(H, g, self_loop=True), g, self_loop=False)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_variance_matches_direct_formula(seed, self_loop):
    rng = np.random.default_rng(seed)
    g = checks.random_graph(rng)
    H = rng.standard_normal((g.n, 4))
    got = neighbor_variance(Tensor(H), g, self_loop).value
    assert np.allclose(got, variance_direct(H, g, self_loop), rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_variance_bounds_property(seed):
    checks.check_variance_bounds(seed)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_replication_property(seed):
    checks.check_replication_invariance(seed)


def test_variance_gradient_through_unit_rows():
    rng = np.random.default_rng(3)
    g = checks.random_graph(rng, n=10)
    W = Tensor(rng.standard_normal((g.d, 3)), requires_grad=True, name="W")
    fn = lambda: ag.mean_all(neighbor_variance(ag.row_l2_normalize(ag.linear(g.dense_x(), W)), g, True))  # noqa: E731
    assert ag.gradcheck(fn, [W], tol=1e-4).passed
