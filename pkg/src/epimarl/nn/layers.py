"""Network building blocks: linear/MLP heads, layer norm, the multi-head
graph-attention message-passing layer, and the scalar budget encoder.

All layers are plain functions over a flat ``dict[str, Tensor]`` of
parameters.  A ``GraphBatch`` packs any number of graphs into flat node and
edge arrays; attention is computed per receiving node with a softmax over its
incoming edges.  Edges are kept sorted by (receiver, sender) so reductions
have a fixed, reproducible order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .init import orthogonal


@dataclass
class GraphBatch:
    """A batch of directed graphs flattened into shared arrays.

    node_x:     (V, node_dim) node features for all graphs.
    edge_x:     (E, edge_dim) edge features.
    senders:    (E,) flat node index of each edge's sender.
    receivers:  (E,) flat node index of each edge's receiver; edges must be
                sorted by (receiver, sender).
    node_graph: (V,) graph id of each node.
    n_graphs:   number of graphs in the batch.
    centers:    (n_graphs,) flat index of each graph's readout node, or None
                for graphs consumed only through pooling.
    """

    node_x: np.ndarray
    edge_x: np.ndarray
    senders: np.ndarray
    receivers: np.ndarray
    node_graph: np.ndarray
    n_graphs: int
    centers: np.ndarray | None = None

    @property
    def n_nodes(self) -> int:
        return self.node_x.shape[0]

    @property
    def n_edges(self) -> int:
        return self.senders.shape[0]


def _p(params: dict, prefix: str, name: str) -> Tensor:
    return params[f"{prefix}.{name}"]


# ---------------------------------------------------------------------------
# linear / MLP


def init_linear(params: dict, rng, prefix: str, n_in: int, n_out: int, gain: float = 1.0):
    params[f"{prefix}.W"] = Tensor(orthogonal(rng, (n_in, n_out), gain), requires_grad=True)
    params[f"{prefix}.b"] = Tensor(np.zeros(n_out), requires_grad=True)


def linear(params: dict, prefix: str, x: Tensor) -> Tensor:
    return x @ _p(params, prefix, "W") + _p(params, prefix, "b")


def init_mlp(params: dict, rng, prefix: str, sizes: tuple[int, ...], out_gain: float = 1.0):
    """Hidden layers use ReLU gain sqrt(2); the output layer uses `out_gain`."""
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        init_linear(params, rng, f"{prefix}.l{i}", a, b, gain=out_gain if last else np.sqrt(2.0))


def mlp(params: dict, prefix: str, x: Tensor, n_layers: int) -> Tensor:
    for i in range(n_layers):
        x = linear(params, f"{prefix}.l{i}", x)
        if i < n_layers - 1:
            x = ad.relu(x)
    return x


# ---------------------------------------------------------------------------
# layer norm


def init_layer_norm(params: dict, prefix: str, dim: int):
    params[f"{prefix}.g"] = Tensor(np.ones(dim), requires_grad=True)
    params[f"{prefix}.b"] = Tensor(np.zeros(dim), requires_grad=True)


def layer_norm(params: dict, prefix: str, x: Tensor, eps: float = 1e-5) -> Tensor:
    m = ad.tmean(x, axis=-1, keepdims=True)
    centered = x - m
    var = ad.tmean(ad.square(centered), axis=-1, keepdims=True)
    normed = centered / ad.sqrt(var + Tensor(eps))
    return normed * _p(params, prefix, "g") + _p(params, prefix, "b")


# ---------------------------------------------------------------------------
# graph attention layer


@dataclass(frozen=True)
class GraphLayerConfig:
    node_dim: int
    edge_dim: int = 4
    msg_dim: int = 32  # per-head attention/message width
    n_heads: int = 3
    out_dim: int = 64


def init_graph_layer(params: dict, rng, prefix: str, cfg: GraphLayerConfig):
    """W1..W5 are stacked per head along the output axis: (node_dim, heads*msg)."""
    wide = cfg.n_heads * cfg.msg_dim

    def stacked(n_in):
        return np.concatenate(
            [orthogonal(rng, (n_in, cfg.msg_dim)) for _ in range(cfg.n_heads)], axis=1
        )

    for name, n_in in (
        ("W1", cfg.node_dim),
        ("W2", cfg.node_dim),
        ("W3", cfg.edge_dim),
        ("W4", cfg.node_dim),
        ("W5", cfg.node_dim),
    ):
        params[f"{prefix}.{name}"] = Tensor(stacked(n_in), requires_grad=True)
    init_layer_norm(params, prefix=f"{prefix}.ln", dim=wide)
    init_linear(params, rng, f"{prefix}.out", wide, cfg.out_dim, gain=np.sqrt(2.0))


def segment_softmax(logits: Tensor, seg_ids: np.ndarray, num_segments: int) -> Tensor:
    """Per-segment softmax along axis 0 of (E, ...) logits.

    The per-segment max is subtracted as a constant; softmax is shift
    invariant so values and gradients are unaffected.
    """
    shift = np.full((num_segments,) + logits.data.shape[1:], -np.inf)
    np.maximum.at(shift, seg_ids, logits.data)
    e = ad.exp(logits - Tensor(shift[seg_ids]))
    denom = ad.segment_sum(e, seg_ids, num_segments)
    return e / ad.gather_rows(denom, seg_ids)


def graph_attention(params: dict, prefix: str, g: GraphBatch, node_x: Tensor,
                    cfg: GraphLayerConfig) -> Tensor:
    """Raw multi-head attention update, concatenated over heads: (V, heads*msg).

    Each receiver aggregates messages from its in-edges with attention weights
    softmax((W4 v_recv) . (W5 v_send) / sqrt(msg_dim)) computed per head.  A
    node with no in-edges keeps only its skip term node_x @ W1.
    """
    H, c = cfg.n_heads, cfg.msg_dim
    skip = node_x @ _p(params, prefix, "W1")
    if g.n_edges == 0:
        return skip
    q = ad.gather_rows(node_x @ _p(params, prefix, "W4"), g.receivers)
    k = ad.gather_rows(node_x @ _p(params, prefix, "W5"), g.senders)
    qk = ad.reshape(q * k, (g.n_edges, H, c))
    logits = ad.tsum(qk, axis=2) * Tensor(1.0 / np.sqrt(c))  # (E, H)
    alpha = segment_softmax(logits, g.receivers, g.n_nodes)
    msg = ad.gather_rows(node_x @ _p(params, prefix, "W2"), g.senders)
    msg = msg + Tensor(g.edge_x) @ _p(params, prefix, "W3")
    msg = ad.reshape(msg, (g.n_edges, H, c))
    weighted = ad.reshape(ad.reshape(alpha, (g.n_edges, H, 1)) * msg, (g.n_edges, H * c))
    agg = ad.segment_sum(weighted, g.receivers, g.n_nodes)
    return skip + agg


def graph_layer(params: dict, prefix: str, g: GraphBatch, node_x: Tensor,
                cfg: GraphLayerConfig) -> Tensor:
    """Full block: attention update -> layer norm -> output projection -> ReLU."""
    raw = graph_attention(params, prefix, g, node_x, cfg)
    normed = layer_norm(params, f"{prefix}.ln", raw)
    return ad.relu(linear(params, f"{prefix}.out", normed))


# ---------------------------------------------------------------------------
# budget encoder


Z_ENCODING_DIM = 8


def init_z_encoder(params: dict, rng, prefix: str):
    init_linear(params, rng, f"{prefix}.z", 1, Z_ENCODING_DIM)


def encode_z(params: dict, prefix: str, z: Tensor) -> Tensor:
    """Affine map of the scalar cost budget to an 8-dim vector; z is (G, 1)."""
    return linear(params, f"{prefix}.z", z)
