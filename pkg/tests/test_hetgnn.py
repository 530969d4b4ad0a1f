import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mthetgnn import numerics as nm
from mthetgnn.errors import ConfigError, DimensionError
from mthetgnn.hetgnn import MTHetGNN, ModelConfig, dynamic_adjacency, propagate
from mthetgnn.relation import RelationStack, distance_base
from mthetgnn.temporal import TemporalConfig

from oracles import propagate_dense

TAGS = ("sim", "cas", "dyn")


def random_stack(n, rng):
    mats = []
    for _ in TAGS:
        a = rng.uniform(size=(n, n))
        np.fill_diagonal(a, 0)
        mats.append(a / a.sum(axis=1, keepdims=True))
    return RelationStack(tuple(mats))


def small_model(n=4, T=8, seed=0, **kw):
    rng = np.random.default_rng(seed + 100)
    cfg = ModelConfig(hidden_size=kw.pop("hidden_size", 5), **kw)
    tcfg = TemporalConfig(kernel_sizes=(2, 3), channels_per_branch=2)
    return MTHetGNN.create(n, T, random_stack(n, rng), cfg, tcfg, seed=seed)


def propagate_instance(rng, n, d, rels, final):
    cfg = ModelConfig(gnn_layers=1, hidden_size=d + 1, relations_enabled=rels)
    p = nm.ParameterStore()
    p.add("hetgnn.layer0.W0", rng.normal(size=(d, d + 1)))
    for r in rels:
        p.add(f"hetgnn.layer0.W_{r}", rng.normal(size=(d, d + 1)))
    p.add("hetgnn.alpha", rng.normal(size=len(rels)))
    H = rng.normal(size=(n, d))
    adj = {r: rng.uniform(size=(n, n)) for r in rels}
    return cfg, p, H, adj


# --------------------------------------------------------------- propagation


@pytest.mark.parametrize("final", [False, True])
def test_propagate_matches_dense_oracle(final):
    rng = np.random.default_rng(0)
    for _ in range(10):
        n, d = rng.integers(4, 9), rng.integers(3, 7)
        rels = TAGS[: rng.integers(1, 4)]
        cfg, p, H, adj = propagate_instance(rng, n, d, rels, final)
        w = nm.softmax(p["hetgnn.alpha"], axis=0)
        got = propagate(nm.Tensor(H), {r: nm.Tensor(a) for r, a in adj.items()}, p, 0, cfg, w, final).data
        want = propagate_dense(H.tolist(), [adj[r].tolist() for r in rels], p["hetgnn.layer0.W0"].data.tolist(),
                               [p[f"hetgnn.layer0.W_{r}"].data.tolist() for r in rels],
                               p["hetgnn.alpha"].data.tolist(), final)
        np.testing.assert_allclose(got, np.array(want), rtol=0, atol=1e-12)


def test_identity_weights_zero_adjacency_is_relu_of_input():
    rng = np.random.default_rng(1)
    cfg = ModelConfig(gnn_layers=1, hidden_size=3, relations_enabled=("sim",))
    p = nm.ParameterStore()
    p.add("hetgnn.layer0.W0", np.eye(3))
    p.add("hetgnn.layer0.W_sim", rng.normal(size=(3, 3)))
    p.add("hetgnn.alpha", np.zeros(1))
    H = rng.normal(size=(4, 3))
    out = propagate(nm.Tensor(H), {"sim": nm.Tensor(np.zeros((4, 4)))}, p, 0, cfg,
                    nm.softmax(p["hetgnn.alpha"], axis=0))
    np.testing.assert_array_equal(out.data, np.maximum(H, 0))


def test_zero_adjacency_isolates_nodes():
    # with no edges, changing one node's features cannot affect another node's output
    rng = np.random.default_rng(2)
    cfg, p, H, adj = propagate_instance(rng, 5, 3, TAGS, False)
    zeros = {r: nm.Tensor(np.zeros((5, 5))) for r in TAGS}
    w = nm.softmax(p["hetgnn.alpha"], axis=0)
    a = propagate(nm.Tensor(H), zeros, p, 0, cfg, w).data
    H2 = H.copy()
    H2[0] += 10.0
    b = propagate(nm.Tensor(H2), zeros, p, 0, cfg, w).data
    np.testing.assert_array_equal(a[1:], b[1:])


def test_alpha_shift_invariance():
    rng = np.random.default_rng(3)
    cfg, p, H, adj = propagate_instance(rng, 5, 4, TAGS, True)
    t_adj = {r: nm.Tensor(a) for r, a in adj.items()}
    a = propagate(nm.Tensor(H), t_adj, p, 0, cfg, nm.softmax(p["hetgnn.alpha"], axis=0), True).data
    b = propagate(nm.Tensor(H), t_adj, p, 0, cfg, nm.softmax(p["hetgnn.alpha"] + 7.5, axis=0), True).data
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_propagate_dimension_errors():
    rng = np.random.default_rng(4)
    cfg, p, H, adj = propagate_instance(rng, 4, 3, ("sim",), False)
    with pytest.raises(DimensionError):
        propagate(nm.Tensor(np.zeros((4, 5))), {"sim": nm.Tensor(adj["sim"])}, p, 0, cfg)
    with pytest.raises(DimensionError):
        propagate(nm.Tensor(H), {"sim": nm.Tensor(np.zeros((3, 3)))}, p, 0, cfg)


# ------------------------------------------------------- dynamic adjacency


def test_dynamic_identity_weight_gives_distance_base():
    rng = np.random.default_rng(5)
    w = rng.normal(size=(4, 6))
    p = nm.ParameterStore()
    p.add("hetgnn.W_dyn", np.eye(4))
    np.testing.assert_allclose(dynamic_adjacency(w, p, 0.0).data, distance_base(w), rtol=1e-14)


def test_dynamic_zero_weight_gives_zero_graph():
    p = nm.ParameterStore()
    p.add("hetgnn.W_dyn", np.zeros((3, 3)))
    np.testing.assert_array_equal(dynamic_adjacency(np.ones((3, 4)), p, 0.1).data, np.zeros((3, 3)))


def test_dynamic_threshold_rows_renormalized():
    rng = np.random.default_rng(6)
    p = nm.ParameterStore()
    p.add("hetgnn.W_dyn", rng.uniform(size=(5, 5)))
    a = dynamic_adjacency(rng.normal(size=(2, 5, 7)), p, 0.25).data
    assert a.shape == (2, 5, 5)
    sums = a.sum(axis=-1)
    assert np.all(np.isclose(sums, 1.0) | (sums == 0))
    assert np.all((a == 0) | (a >= 0.25 - 1e-12))


# -------------------------------------------------------------- full model


def test_forward_shapes():
    m = small_model()
    x = np.random.default_rng(7).normal(size=(3, 4, 8))
    assert m.forward(x).shape == (3, 4)
    assert m.forward(x[0]).shape == (4,)
    np.testing.assert_allclose(m.predict(x, batch_size=2), m.forward(x).data, rtol=1e-12)
    with pytest.raises(DimensionError):
        m.forward(np.zeros((3, 4, 9)))


def test_default_model_parameter_count():
    stack = RelationStack(tuple(np.zeros((8, 8)) for _ in TAGS))
    m = MTHetGNN.create(8, 32, stack)
    expected = (3 * 8 + 5 * 8 + 7 * 8 + 3 * 8) + 64 + 4 * 672 * 50 + 4 * 50 * 50 + 3 + 51
    assert m.params.count() == expected


def test_type1_ignores_similarity_graph():
    m = small_model(relations_enabled=("cas",))
    x = np.random.default_rng(8).normal(size=(2, 4, 8))
    before = m.forward(x).data
    m.stack.matrices[0][:] = np.random.default_rng(9).uniform(size=(4, 4))
    np.testing.assert_array_equal(m.forward(x).data, before)
    assert "hetgnn.W_dyn" not in dict(m.params.items())


def test_type4_averages_relations():
    m = small_model(attention_enabled=False)
    x = np.random.default_rng(10).normal(size=(4, 8))
    adj = m.adjacencies(x)
    assert list(adj) == ["avg"]
    want = (m.stack["sim"] + m.stack["cas"] + dynamic_adjacency(x, m.params, m.model_cfg.threshold).data) / 3
    np.testing.assert_allclose(adj["avg"].data, want, rtol=1e-14)
    assert m.attention() == pytest.approx({t: 1 / 3 for t in TAGS})


def test_attention_starts_uniform():
    assert small_model().attention() == pytest.approx({t: 1 / 3 for t in TAGS})


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000))
def test_model_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    m = small_model(n=5, seed=seed)
    x = rng.normal(size=(5, 8))
    perm = rng.permutation(5)
    out = m.forward(x).data
    mats = tuple(a[np.ix_(perm, perm)].copy() for a in m.stack.matrices)
    m2 = MTHetGNN(5, 8, RelationStack(mats), m.model_cfg, m.temporal_cfg, m.params)
    w = m.params["hetgnn.W_dyn"].data.copy()
    m.params["hetgnn.W_dyn"].data[:] = w[np.ix_(perm, perm)]
    np.testing.assert_allclose(m2.forward(x[perm]).data, out[perm], rtol=1e-10, atol=1e-12)


def test_full_model_gradcheck():
    m = small_model(n=4, T=8, seed=11)
    rng = np.random.default_rng(12)
    m.params["hetgnn.alpha"].data[:] = rng.normal(size=3)
    m.params["readout.bias"].data[:] = 0.3
    x = rng.normal(size=(2, 4, 8))
    y = rng.normal(size=(2, 4))

    def loss():
        d = m.forward(x) - nm.Tensor(y)
        return nm.tensor_sum(d * d)

    m.params.zero_grad()
    nm.backward(loss())
    for name, p in m.params.items():
        for _ in range(2):
            idx = tuple(rng.integers(0, s) for s in p.shape)
            fd = nm.numerical_gradient(lambda: loss().item(), p, idx, 1e-5)
            assert p.grad[idx] == pytest.approx(fd, rel=1e-4, abs=1e-7), name


def test_config_errors():
    with pytest.raises(ConfigError):
        ModelConfig(relations_enabled=()).validate()
    with pytest.raises(ConfigError):
        ModelConfig(relations_enabled=("sim", "foo")).validate()
    with pytest.raises(ConfigError):
        ModelConfig.for_ablation("type9")
    assert ModelConfig(relations_enabled=("dyn", "sim")).relations == ("sim", "dyn")
