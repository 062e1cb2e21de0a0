"""Graph-attention layer semantics: empty neighborhoods, attention weights,
permutation invariance of the reduction, budget encoder affinity, and full
layer gradients vs finite differences."""

import numpy as np
import pytest

from epimarl.nn import autodiff as ad
from epimarl.nn.autodiff import Tensor
from epimarl.nn.layers import (
    GraphBatch,
    GraphLayerConfig,
    encode_z,
    graph_attention,
    graph_layer,
    init_graph_layer,
    init_z_encoder,
    segment_softmax,
)

CFG = GraphLayerConfig(node_dim=5, edge_dim=4, msg_dim=8, n_heads=3, out_dim=16)


def make_graph(node_x, edges, edge_x, centers=None):
    edges = np.asarray(edges, dtype=np.intp).reshape(-1, 2)
    edge_x = np.asarray(edge_x, dtype=np.float64).reshape(-1, 4)
    order = np.lexsort((edges[:, 1], edges[:, 0])) if len(edges) else np.array([], dtype=np.intp)
    return GraphBatch(
        node_x=np.asarray(node_x, dtype=np.float64),
        edge_x=edge_x[order],
        senders=edges[order, 1] if len(edges) else np.zeros(0, dtype=np.intp),
        receivers=edges[order, 0] if len(edges) else np.zeros(0, dtype=np.intp),
        node_graph=np.zeros(len(node_x), dtype=np.intp),
        n_graphs=1,
        centers=centers,
    )


@pytest.fixture
def params():
    p = {}
    init_graph_layer(p, np.random.default_rng(0), "g", CFG)
    return p


def test_isolated_node_keeps_only_skip_term(params):
    x = np.random.default_rng(1).standard_normal((1, 5))
    g = make_graph(x, [], np.zeros((0, 4)))
    out = graph_attention(params, "g", g, Tensor(x), CFG)
    expected = x @ params["g.W1"].data
    assert np.allclose(out.data, expected, atol=0, rtol=0)


def test_single_neighbor_attention_weight_is_one(params):
    rng = np.random.default_rng(2)
    x = rng.standard_normal((2, 5))
    e = rng.standard_normal((1, 4))
    g = make_graph(x, [[0, 1]], e)
    out = graph_attention(params, "g", g, Tensor(x), CFG)
    # alpha = 1 regardless of the logit: softmax over a singleton
    msg = (x @ params["g.W2"].data)[1] + (e @ params["g.W3"].data)[0]
    expected = (x @ params["g.W1"].data)[0] + msg
    assert np.allclose(out.data[0], expected, rtol=1e-12, atol=1e-12)


def test_equal_logit_neighbors_split_half_half(params):
    rng = np.random.default_rng(3)
    x = rng.standard_normal((3, 5))
    x[2] = x[1]  # identical senders produce identical logits
    e = rng.standard_normal((2, 4))
    g = make_graph(x, [[0, 1], [0, 2]], e)
    out = graph_attention(params, "g", g, Tensor(x), CFG)
    msgs = np.stack(
        [
            (x @ params["g.W2"].data)[1] + (e[0:1] @ params["g.W3"].data)[0],
            (x @ params["g.W2"].data)[2] + (e[1:2] @ params["g.W3"].data)[0],
        ]
    )
    expected = (x @ params["g.W1"].data)[0] + 0.5 * msgs[0] + 0.5 * msgs[1]
    assert np.allclose(out.data[0], expected, rtol=1e-12, atol=1e-12)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(4)
    logits = Tensor(rng.standard_normal((10, 3)) * 5)
    seg = np.sort(rng.integers(0, 4, size=10))
    alpha = segment_softmax(logits, seg, 4)
    sums = np.zeros((4, 3))
    np.add.at(sums, seg, alpha.data)
    present = np.unique(seg)
    assert np.all(np.abs(sums[present] - 1.0) < 1e-12)


def test_neighbor_order_permutation_is_bit_exact(params):
    rng = np.random.default_rng(5)
    x = rng.standard_normal((5, 5))
    edges = [[0, 1], [0, 2], [0, 3], [0, 4]]
    e = rng.standard_normal((4, 4))
    g1 = make_graph(x, edges, e)
    perm = [2, 0, 3, 1]
    g2 = make_graph(x, [edges[i] for i in perm], e[perm])
    out1 = graph_attention(params, "g", g1, Tensor(x), CFG)
    out2 = graph_attention(params, "g", g2, Tensor(x), CFG)
    assert np.array_equal(out1.data, out2.data)


def test_full_layer_matches_finite_differences(params):
    rng = np.random.default_rng(6)
    x = rng.standard_normal((4, 5))
    edges = [[0, 1], [0, 2], [1, 0], [1, 3]]
    e = rng.standard_normal((4, 4))
    g = make_graph(x, edges, e)
    weights = rng.standard_normal((4, CFG.out_dim))

    def loss_value(pdict):
        with ad.no_grad():
            out = graph_layer(pdict, "g", g, Tensor(x), CFG)
            return float((out.data * weights).sum())

    out = graph_layer(params, "g", g, Tensor(x), CFG)
    loss = ad.tsum(out * Tensor(weights))
    for p in params.values():
        p.zero_grad()
    ad.backward(loss)

    eps = 1e-5
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        picks = rng.choice(flat.size, size=min(6, flat.size), replace=False)
        for j in picks:
            orig = flat[j]
            flat[j] = orig + eps
            up = loss_value(params)
            flat[j] = orig - eps
            down = loss_value(params)
            flat[j] = orig
            fd = (up - down) / (2 * eps)
            got = tensor.grad.reshape(-1)[j]
            assert abs(got - fd) <= max(1e-6, 1e-4 * abs(fd)), f"{name}[{j}]: {got} vs {fd}"


def test_z_encoder_zero_bias_maps_zero_to_zero():
    p = {}
    init_z_encoder(p, np.random.default_rng(0), "h")
    out = encode_z(p, "h", Tensor(np.zeros((1, 1))))
    assert np.array_equal(out.data, np.zeros((1, 8)))


def test_z_encoder_is_affine():
    p = {}
    init_z_encoder(p, np.random.default_rng(1), "h")
    p["h.z.b"].data = np.random.default_rng(2).standard_normal(8)  # nonzero bias

    def enc(z):
        return encode_z(p, "h", Tensor([[z]])).data[0]

    lhs = enc(2 * 1.7) - enc(0.0)
    rhs = 2 * (enc(1.7) - enc(0.0))
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_z_encoder_gradient_is_column_sum_of_weight():
    p = {}
    init_z_encoder(p, np.random.default_rng(3), "h")
    z = Tensor(np.array([[0.37]]), requires_grad=True)
    out = ad.tsum(encode_z(p, "h", z))
    ad.backward(out)
    expected = p["h.z.W"].data.sum()
    assert z.grad[0, 0] == pytest.approx(expected, rel=1e-12)
    # cross-check with a finite difference
    with ad.no_grad():
        up = float(ad.tsum(encode_z(p, "h", Tensor([[0.37 + 1e-5]]))).data)
        down = float(ad.tsum(encode_z(p, "h", Tensor([[0.37 - 1e-5]]))).data)
    assert z.grad[0, 0] == pytest.approx((up - down) / 2e-5, rel=1e-6)
