import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from checks import cora_dir, random_graph
from vgod.graph import (AttributedGraph, GraphFormatError, OutlierGroundTruth, _sample_pairs, compute_homophily,
                        generate_sbm, load_bundle, load_graph, load_linqs_citation, save_graph,
                        subset_attribute_variance)
from vgod.harness import load_source


def write_dir(tmp_path, edges, feats, classes=None):
    (tmp_path / "edges.txt").write_text(edges)
    (tmp_path / "features.txt").write_text(feats)
    if classes is not None:
        (tmp_path / "classes.txt").write_text(classes)
    return tmp_path


def test_duplicate_edge_collapsed(tmp_path):
    d = write_dir(tmp_path, "0 1\n1 2\n1 0\n", "3 2\n1 0\n0 1\n1 1\n")
    g = load_graph(d)
    assert g.m == 2
    assert g.degrees.tolist() == [1, 2, 1]
    assert g.dropped_edges == 1


def test_self_loop_dropped_with_warning(tmp_path, caplog):
    d = write_dir(tmp_path, "5 5\n", "6 1\n" + "0\n" * 6)
    with caplog.at_level(logging.WARNING):
        g = load_graph(d)
    assert g.m == 0 and g.dropped_edges == 1
    assert "dropped 1" in caplog.text


@pytest.mark.parametrize("edges,feats,msg", [
    ("0 x\n", "2 1\n0\n0\n", "non-integer"),
    ("0 7\n", "2 1\n0\n0\n", "outside"),
    ("0 1\n", "3 1\n0\n0\n", "feature rows"),
    ("0 1\n", "2 2\n0:1\n2:1\n", "column"),
    ("0 1\n", "2\n0\n0\n", "first line"),
])
def test_malformed_inputs(tmp_path, edges, feats, msg):
    d = write_dir(tmp_path, edges, feats)
    with pytest.raises(GraphFormatError, match=msg):
        load_graph(d)


def test_missing_file(tmp_path):
    (tmp_path / "edges.txt").write_text("0 1\n")
    with pytest.raises(FileNotFoundError):
        load_graph(tmp_path)


def test_dense_and_sparse_feature_formats_agree(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = write_dir(tmp_path / "a", "0 1\n", "2 3\n1.5 0 2\n0 0 0\n")
    b = write_dir(tmp_path / "b", "0 1\n", "2 3\n0:1.5 2:2\n\n")
    assert np.array_equal(load_graph(a).dense_x(), load_graph(b).dense_x())


def test_adjacency_symmetric_and_degree_sum():
    g = random_graph(np.random.default_rng(3), n=25)
    A = g.adjacency()
    assert (A != A.T).nnz == 0
    assert g.degrees.sum() == 2 * g.m
    for i in range(g.n):
        for j in g.neighbors(i):
            assert i in g.neighbors(j)


def test_empty_graph_round_trips(tmp_path):
    g = AttributedGraph.from_edges(1, np.empty((0, 2)), np.zeros((1, 2)))
    save_graph(g, tmp_path)
    assert load_graph(tmp_path).same_as(g)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_round_trip_bit_exact(tmp_path_factory, seed, dense):
    rng = np.random.default_rng(seed)
    g = random_graph(rng, classes=3, dense_x=dense)
    if dense:  # awkward reals survive the text format exactly
        g = g.with_attributes(g.dense_x() * np.pi * 1e-7)
    d = tmp_path_factory.mktemp("rt")
    save_graph(g, d)
    assert load_graph(d).same_as(g)


def test_sbm_round_trips(tmp_path):
    g = generate_sbm(300, 3, 0.05, 0.002, 6, 2.0, seed=1)
    save_graph(g, tmp_path)
    assert load_graph(tmp_path).same_as(g)


def test_outlier_file_round_trip(tmp_path):
    from vgod.graph import DatasetBundle, save_bundle
    g = random_graph(np.random.default_rng(0), n=12)
    t = OutlierGroundTruth({1, 2}, {5}, {"q=2": {1, 2}})
    save_bundle(DatasetBundle(g, t, {"seed": 4}), tmp_path)
    b = load_bundle(tmp_path)
    assert b.truth == t
    assert b.provenance == {"seed": 4}
    assert (tmp_path / "outliers.txt").read_text().splitlines()[0] == "1\tstr\tq=2"


def test_truth_invariants():
    with pytest.raises(ValueError):
        OutlierGroundTruth({1}, {1})
    t = OutlierGroundTruth({1, 2}, {3}, {"a": {1}, "b": {2, 3}})
    assert t.all == {1, 2, 3}
    assert t.kind_of(3) == "ctx" and t.group_of(2) == "b" and t.kind_of(0) is None
    t.validate(4)
    with pytest.raises(ValueError):
        t.validate(3)
    with pytest.raises(ValueError):
        OutlierGroundTruth({1}, set(), {"a": {1, 7}}).validate(10)


def test_graph_arrays_read_only():
    g = random_graph(np.random.default_rng(1))
    with pytest.raises(ValueError):
        g.edges[0, 0] = 5


# ---------------------------------------------------------------- SBM

def test_sbm_forced_topology():
    g = generate_sbm(4, 2, 1.0, 0.0, 2, 1.0, seed=0)
    assert g.edges.tolist() == [[0, 1], [2, 3]]
    assert g.class_labels.tolist() == [0, 0, 1, 1]


def test_sbm_intra_edge_fraction():
    n, c, pin, pout = 1000, 4, 0.05, 0.001
    g = generate_sbm(n, c, pin, pout, 4, 1.0, seed=7)
    lab = g.class_labels
    intra = np.mean(lab[g.edges[:, 0]] == lab[g.edges[:, 1]])
    s = n // c
    e_in = c * s * (s - 1) / 2 * pin
    e_out = (n * (n - 1) / 2 - c * s * (s - 1) / 2) * pout
    assert abs(intra - e_in / (e_in + e_out)) < 0.1


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_sbm_deterministic(seed):
    a = generate_sbm(120, 3, 0.1, 0.01, 5, 2.0, seed)
    b = generate_sbm(120, 3, 0.1, 0.01, 5, 2.0, seed)
    assert a.same_as(b)


@pytest.mark.parametrize("pin,pout,c", [(0.1, 0.2, 2), (1.1, 0.0, 2), (0.5, 0.1, 1), (0.5, -0.1, 2)])
def test_sbm_rejects_bad_parameters(pin, pout, c):
    with pytest.raises(ValueError):
        generate_sbm(10, c, pin, pout, 2, 1.0, 0)


def test_sbm_mean_separation():
    g = generate_sbm(4000, 4, 0.01, 0.0, 8, 3.0, seed=2)
    X = g.dense_x()
    mu = np.stack([X[g.class_labels == c].mean(axis=0) for c in range(4)])
    assert np.linalg.norm(mu[0] - mu[1]) == pytest.approx(3.0, abs=0.15)


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 40), st.integers(1, 40), st.booleans(), st.floats(0.05, 1.0), st.integers(0, 999))
def test_sample_pairs_valid(a, b, same, p, seed):
    pairs = _sample_pairs(np.random.default_rng(seed), a, b, same, p)
    if same:
        assert np.all(pairs[:, 0] < pairs[:, 1]) and np.all(pairs[:, 1] < a)
    else:
        assert np.all(pairs[:, 0] < a) and np.all(pairs[:, 1] < b)
    assert len({tuple(x) for x in pairs.tolist()}) == len(pairs)


def test_sample_pairs_full_triangle():
    pairs = _sample_pairs(np.random.default_rng(0), 9, 9, True, 1.0)
    iu, ju = np.triu_indices(9, k=1)
    assert np.array_equal(pairs, np.stack([iu, ju], axis=1))


# ---------------------------------------------------------------- statistics

def test_homophily_pure_and_anti():
    X = np.zeros((4, 1))
    labels = [0, 0, 1, 1]
    pure = AttributedGraph.from_edges(4, [(0, 1), (2, 3)], X, labels)
    anti = AttributedGraph.from_edges(4, [(0, 2), (0, 3), (1, 2), (1, 3)], X, labels)
    assert compute_homophily(pure) == 1.0
    assert compute_homophily(anti) == -1.0


def test_homophily_random_labels_near_zero():
    rng = np.random.default_rng(0)
    g = generate_sbm(3000, 2, 0.004, 0.003, 2, 1.0, seed=0)
    assert abs(compute_homophily(g, rng.integers(0, 3, size=g.n))) < 0.05


def test_homophily_errors_and_permutation():
    X = np.zeros((3, 1))
    with pytest.raises(ValueError):
        compute_homophily(AttributedGraph.from_edges(3, np.empty((0, 2)), X, [0, 1, 0]))
    with pytest.raises(ValueError):
        compute_homophily(AttributedGraph.from_edges(3, [(0, 1)], X, [0, 0, 0]))
    g = generate_sbm(200, 3, 0.1, 0.01, 2, 1.0, seed=3)
    perm = np.random.default_rng(1).permutation(g.n)
    assert compute_homophily(g.permute(perm)) == pytest.approx(compute_homophily(g), abs=1e-12)


def test_subset_variance():
    g = AttributedGraph.from_edges(3, np.empty((0, 2)), [[0, 0], [2, 0], [2, 0]])
    assert subset_attribute_variance(g, [0, 1]) == 1.0
    assert subset_attribute_variance(g, [1, 2]) == 0.0
    with pytest.raises(ValueError):
        subset_attribute_variance(g, [])


def test_linqs_loader(tmp_path):
    (tmp_path / "toy.content").write_text("p1 1 0 1 A\np2 0 1 0 B\np3 1 1 0 A\n")
    (tmp_path / "toy.cites").write_text("p1 p2\np2 p1\np3 p1\np9 p1\n")
    g = load_linqs_citation(tmp_path / "toy.content", tmp_path / "toy.cites")
    assert g.n == 3 and g.m == 2 and g.d == 3
    assert g.class_labels.tolist() == [0, 1, 0]
    assert load_source(str(tmp_path)).graph.same_as(g)


@pytest.mark.skipif(cora_dir() is None, reason="Cora files not present (set VGOD_CORA or place them in data/cora)")
def test_cora_shape():
    g = load_source(str(cora_dir())).graph
    assert g.d == 1433
    # published counts: raw citation rows (duplicates included) and 2,706 nodes
    assert g.m + g.dropped_edges == 5429
    assert g.n == 2706
