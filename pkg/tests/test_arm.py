import numpy as np
import pytest

from vgod import autograd as ag
from vgod.arm import ArmConfig, ArmModel, _row_errors, arm_forward, arm_loss, arm_train, prepare_attributes, recon_score
from vgod.graph import generate_sbm
from vgod.injection import inject_contextual
from vgod.metrics import auc, inliers


@pytest.fixture(scope="module")
def sbm():
    return generate_sbm(500, 4, 0.03, 0.001, 12, 3.0, seed=1)


def test_zero_layers_rejected():
    with pytest.raises(ValueError):
        ArmConfig(layers=0)
    with pytest.raises(ValueError):
        ArmConfig(gnn="sage")


@pytest.mark.parametrize("gnn", ["gcn", "gat", "gin"])
@pytest.mark.parametrize("layers", [1, 3])
def test_forward_shape_and_score_contract(sbm, gnn, layers):
    m = ArmModel.init(sbm.d, ArmConfig(hidden=8, gnn=gnn, layers=layers, seed=2))
    assert arm_forward(m, sbm).shape == (sbm.n, sbm.d)
    s = recon_score(m, sbm)
    assert s.shape == (sbm.n,) and np.all(s >= 0) and np.all(np.isfinite(s))


def test_layer_activations():
    cfgs = ArmConfig(layers=3).layer_configs()
    assert [c.activation for c in cfgs] == ["relu", "relu", "none"]


def test_row_errors_examples():
    X = np.array([[1.0, 2.0], [3.0, -1.0]])
    assert np.array_equal(_row_errors(ag.Tensor(X), X).value, [0.0, 0.0])
    assert _row_errors(ag.Tensor(np.zeros((1, 2))), np.array([[1.0, 2.0]])).value[0] == 5.0


def test_shape_mismatch(sbm):
    m = ArmModel.init(sbm.d + 1, ArmConfig(hidden=4))
    with pytest.raises(ValueError):
        arm_forward(m, sbm)


def test_epochs_zero(sbm):
    m = arm_train(sbm, ArmConfig(hidden=8, epochs=0, seed=3))
    fresh = ArmModel.init(sbm.d, ArmConfig(hidden=8, epochs=0, seed=3))
    for n in m.store.names():
        assert np.array_equal(m.store[n].value, fresh.store[n].value)


def test_loss_decreases(sbm):
    cfg = ArmConfig(hidden=32, epochs=30, seed=0)
    init = float(arm_loss(ArmModel.init(sbm.d, cfg), sbm).value)
    m = arm_train(sbm, cfg)
    assert np.all(np.diff(m.history[:10]) < 0)
    assert float(arm_loss(m, sbm).value) < init


def test_exhaustive_contextual_detected():
    g = generate_sbm(800, 4, 0.03, 0.001, 16, 3.0, seed=0)
    b = inject_contextual(g, 40, g.n, "euclidean", seed=1)
    s = recon_score(arm_train(b.graph, ArmConfig(seed=0)), b.graph)
    assert auc(sorted(b.truth.contextual), inliers(b.truth, g.n), s) >= 0.8


def test_row_normalisation_is_l1(sbm):
    X = prepare_attributes(sbm.with_attributes(np.abs(sbm.dense_x())), True)
    assert np.allclose(np.asarray(abs(X).sum(axis=1)).ravel(), 1.0)
    zero = sbm.with_attributes(np.zeros((sbm.n, sbm.d)))
    assert prepare_attributes(zero, True).nnz == 0


def test_checkpoint_round_trip(sbm, tmp_path):
    m = arm_train(sbm, ArmConfig(hidden=8, epochs=2, gnn="gin", seed=1))
    m.save(tmp_path / "a.ckpt")
    back = ArmModel.load(tmp_path / "a.ckpt")
    assert back.config == m.config
    assert np.array_equal(recon_score(back, sbm), recon_score(m, sbm))
    from vgod.vbm import VbmModel
    with pytest.raises(ValueError, match="VBM"):
        VbmModel.load(tmp_path / "a.ckpt")


def test_matches_torch_reference(sbm):
    """Same architecture and initial weights in torch: losses agree for several Adam steps."""
    torch = pytest.importorskip("torch")
    torch.set_default_dtype(torch.float64)
    cfg = ArmConfig(hidden=16, epochs=5, seed=0)
    init = ArmModel.init(sbm.d, cfg)
    P = {k: torch.tensor(init.store[k].value.copy(), requires_grad=True) for k in init.store.names()}
    X = torch.tensor(sbm.dense_x())
    src, dst = (torch.tensor(a) for a in sbm.edge_index(self_loops=True))
    n = sbm.n

    def gat(z, p):
        z = z @ P[p + ".W"]
        e = torch.nn.functional.leaky_relu((z @ P[p + ".a_dst"])[dst] + (z @ P[p + ".a_src"])[src], 0.2)
        mx = torch.full((n,), -torch.inf).scatter_reduce(0, dst, e, "amax")
        w = torch.exp(e - mx[dst])
        w = w / torch.zeros(n).index_add(0, dst, w)[dst]
        return torch.zeros(n, z.shape[1]).index_add(0, dst, w[:, None] * z[src]) + P[p + ".b"]

    opt = torch.optim.Adam(P.values(), lr=cfg.lr, eps=1e-8)
    ref = []
    for _ in range(cfg.epochs):
        opt.zero_grad()
        z = torch.nn.functional.normalize(X @ P["enc.W"] + P["enc.b"], dim=1, eps=1e-12)
        z = gat(torch.relu(gat(z, "gnn0")), "gnn1")
        loss = ((z @ P["dec.W"] + P["dec.b"] - X) ** 2).sum(1).mean()
        loss.backward()
        opt.step()
        ref.append(loss.item())
    ours = arm_train(sbm, cfg).history
    assert np.allclose(ours, ref, rtol=1e-10)
