"""The three budget-conditioned function approximators.

* policy(o_i, z): distributed; graph-attention backbone over the agent's
  local observation graph, readout at the agent's own node, concatenated
  with the encoded budget, Gaussian head squashed by tanh into [-1, 1]^2.
* cost value V^l(x, z): centralized; same backbone over the full graph with
  mean-pooled node embeddings.
* constraint value V^h(o_i, z): distributed scalar head; a single
  message-passing layer by default (two for connect_spread).

All forwards take a ``GraphBatch`` and a per-graph budget vector and work
identically inside and outside gradient recording.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env.types import AgentGraph, EDGE_FEATURE_DIM, NODE_FEATURE_DIM
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.layers import (
    GraphBatch,
    GraphLayerConfig,
    Z_ENCODING_DIM,
    encode_z,
    graph_layer,
    init_graph_layer,
    init_mlp,
    init_z_encoder,
    mlp,
)

LOG_STD_INIT = -0.5
TANH_LOGPROB_EPS = 1e-6
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class NetConfig:
    node_dim: int = NODE_FEATURE_DIM
    edge_dim: int = EDGE_FEATURE_DIM
    msg_dim: int = 32
    gnn_out: int = 64
    n_heads: int = 3
    policy_gnn_layers: int = 2
    vl_gnn_layers: int = 2
    vh_gnn_layers: int = 1
    head_hidden: tuple[int, ...] = (32, 32)
    action_dim: int = 2


def net_config_for_task(task: str) -> NetConfig:
    # the connectivity constraint needs two-hop information
    return NetConfig(vh_gnn_layers=2 if task == "connect_spread" else 1)


def _layer_cfg(cfg: NetConfig, depth: int) -> GraphLayerConfig:
    return GraphLayerConfig(
        node_dim=cfg.node_dim if depth == 0 else cfg.gnn_out,
        edge_dim=cfg.edge_dim,
        msg_dim=cfg.msg_dim,
        n_heads=cfg.n_heads,
        out_dim=cfg.gnn_out,
    )


def _init_backbone(params: dict, rng, prefix: str, cfg: NetConfig, n_layers: int,
                   out_dim: int, out_gain: float):
    for d in range(n_layers):
        init_graph_layer(params, rng, f"{prefix}.gnn{d}", _layer_cfg(cfg, d))
    init_z_encoder(params, rng, f"{prefix}")
    sizes = (cfg.gnn_out + Z_ENCODING_DIM,) + cfg.head_hidden + (out_dim,)
    init_mlp(params, rng, f"{prefix}.head", sizes, out_gain=out_gain)


def _embed(params: dict, prefix: str, g: GraphBatch, cfg: NetConfig, n_layers: int) -> Tensor:
    x = Tensor(g.node_x)
    for d in range(n_layers):
        x = graph_layer(params, f"{prefix}.gnn{d}", g, x, _layer_cfg(cfg, d))
    return x


def _head(params: dict, prefix: str, emb: Tensor, z: Tensor, cfg: NetConfig) -> Tensor:
    zin = encode_z(params, prefix, ad.reshape(z, (-1, 1)))
    h = ad.concat([emb, zin], axis=1)
    return mlp(params, f"{prefix}.head", h, n_layers=len(cfg.head_hidden) + 1)


def _pool_mean(emb: Tensor, g: GraphBatch) -> Tensor:
    total = ad.segment_sum(emb, g.node_graph, g.n_graphs)
    counts = np.bincount(g.node_graph, minlength=g.n_graphs).astype(np.float64)
    return total * Tensor(1.0 / counts[:, None])


# ---------------------------------------------------------------------------
# policy


def init_policy(rng, cfg: NetConfig) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    _init_backbone(params, rng, "pi", cfg, cfg.policy_gnn_layers, cfg.action_dim, out_gain=0.01)
    params["pi.log_std"] = Tensor(np.full(cfg.action_dim, LOG_STD_INIT), requires_grad=True)
    return params


def policy_forward(params: dict, g: GraphBatch, z: np.ndarray, cfg: NetConfig
                   ) -> tuple[Tensor, Tensor]:
    """(mean (G, action_dim), log_std (action_dim,)) before tanh squashing."""
    emb = _embed(params, "pi", g, cfg, cfg.policy_gnn_layers)
    center_emb = ad.gather_rows(emb, g.centers)
    mean = _head(params, "pi", center_emb, Tensor(z), cfg)
    return mean, params["pi.log_std"]


# ---------------------------------------------------------------------------
# value heads


def init_cost_value(rng, cfg: NetConfig) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    _init_backbone(params, rng, "vl", cfg, cfg.vl_gnn_layers, 1, out_gain=1.0)
    return params


def vl_forward(params: dict, g: GraphBatch, z: np.ndarray, cfg: NetConfig) -> Tensor:
    """Centralized cost value, (G,); reads the full graph via mean pooling."""
    emb = _embed(params, "vl", g, cfg, cfg.vl_gnn_layers)
    pooled = _pool_mean(emb, g)
    return ad.reshape(_head(params, "vl", pooled, Tensor(z), cfg), (-1,))


# The max-backup target is self-consistent for any constant at or above the
# true maximum margin, so an optimistic critic can never learn downward;
# starting below every achievable margin grounds it from the safe side.
VH_INIT_BIAS = -1.0


def init_constraint_value(rng, cfg: NetConfig) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    _init_backbone(params, rng, "vh", cfg, cfg.vh_gnn_layers, 1, out_gain=1.0)
    last = len(cfg.head_hidden)
    params[f"vh.head.l{last}.b"].data[:] = VH_INIT_BIAS
    return params


def vh_forward(params: dict, g: GraphBatch, z: np.ndarray, cfg: NetConfig) -> Tensor:
    """Distributed constraint value, (G,); reads the agent's local graph."""
    emb = _embed(params, "vh", g, cfg, cfg.vh_gnn_layers)
    center_emb = ad.gather_rows(emb, g.centers)
    return ad.reshape(_head(params, "vh", center_emb, Tensor(z), cfg), (-1,))


def vh_embedding(params: dict, g: GraphBatch, cfg: NetConfig) -> np.ndarray:
    """Budget-independent part of V^h: the center-node embeddings (G, gnn_out).

    The budget enters after pooling, so budget sweeps (root finding) only
    need to re-run the small head; see ``vh_from_embedding``.
    """
    with ad.no_grad():
        emb = _embed(params, "vh", g, cfg, cfg.vh_gnn_layers)
        return emb.data[g.centers]


def vh_from_embedding(params: dict, emb: np.ndarray, z: float | np.ndarray,
                      cfg: NetConfig) -> np.ndarray:
    """Evaluate the V^h head on precomputed embeddings, plain numpy."""
    emb = np.atleast_2d(emb)
    zcol = np.broadcast_to(np.asarray(z, dtype=np.float64), (emb.shape[0],))[:, None]
    zw = params["vh.z.W"].data
    zb = params["vh.z.b"].data
    x = np.concatenate([emb, zcol @ zw + zb], axis=1)
    n_layers = len(cfg.head_hidden) + 1
    for i in range(n_layers):
        x = x @ params[f"vh.head.l{i}.W"].data + params[f"vh.head.l{i}.b"].data
        if i < n_layers - 1:
            x = np.maximum(x, 0.0)
    return x[:, 0]


# ---------------------------------------------------------------------------
# action distribution (diagonal Gaussian squashed by tanh)


@dataclass
class ActionDistribution:
    """Per-agent action distribution on [-1, 1]^d.

    ``mean``/``log_std`` parameterize the pre-squash Gaussian; actions are
    tanh of a Gaussian sample and log-probs include the change-of-variables
    correction with a 1e-6 floor inside the log.
    """

    mean: np.ndarray  # (..., d) pre-squash mean
    log_std: np.ndarray  # (d,)

    def mode(self) -> np.ndarray:
        return np.tanh(self.mean)

    def sample(self, rng) -> tuple[np.ndarray, np.ndarray]:
        """(pre-squash sample, squashed action)."""
        noise = rng.standard_normal(self.mean.shape)
        u_pre = self.mean + np.exp(self.log_std) * noise
        return u_pre, np.tanh(u_pre)

    def log_prob(self, u_pre: np.ndarray) -> np.ndarray:
        std = np.exp(self.log_std)
        zscore = (u_pre - self.mean) / std
        base = -0.5 * (zscore * zscore) - self.log_std - 0.5 * LOG_2PI
        squash = np.log(1.0 - np.tanh(u_pre) ** 2 + TANH_LOGPROB_EPS)
        return (base - squash).sum(axis=-1)


def policy_distribution(params: dict, g: GraphBatch, z: np.ndarray, cfg: NetConfig
                        ) -> ActionDistribution:
    with ad.no_grad():
        mean, log_std = policy_forward(params, g, z, cfg)
    return ActionDistribution(mean=mean.data, log_std=log_std.data)


def squashed_log_prob(mean: Tensor, log_std: Tensor, u_pre: np.ndarray) -> Tensor:
    """Tensor-valued log-prob of recorded pre-squash actions, (G,)."""
    u = Tensor(u_pre)
    std = ad.exp(log_std)
    zscore = (u - mean) / std
    base = ad.square(zscore) * Tensor(-0.5) - log_std - Tensor(0.5 * LOG_2PI)
    squash = ad.log(Tensor(1.0) - ad.square(ad.tanh(u)) + Tensor(TANH_LOGPROB_EPS))
    return ad.tsum(base - squash, axis=-1)


def gaussian_entropy(log_std: Tensor) -> Tensor:
    """Entropy of the pre-squash Gaussian (the usual bonus for squashed heads)."""
    d = log_std.data.shape[0]
    return ad.tsum(log_std) + Tensor(0.5 * d * (1.0 + LOG_2PI))


# ---------------------------------------------------------------------------
# head bundle


@dataclass
class ValueHeads:
    """Parameter sets of the three approximators plus their shared layout."""

    policy: dict[str, Tensor]
    cost_value: dict[str, Tensor]
    constraint_value: dict[str, Tensor]
    net_config: NetConfig

    def all_params(self) -> dict[str, Tensor]:
        merged = {}
        for name, group in (
            ("pi", self.policy),
            ("vl", self.cost_value),
            ("vh", self.constraint_value),
        ):
            for k, v in group.items():
                assert k.startswith(name + ".")
                merged[k] = v
        return merged


def init_heads(rng, cfg: NetConfig) -> ValueHeads:
    return ValueHeads(
        policy=init_policy(rng, cfg),
        cost_value=init_cost_value(rng, cfg),
        constraint_value=init_constraint_value(rng, cfg),
        net_config=cfg,
    )


def heads_from_params(params: dict[str, Tensor], cfg: NetConfig) -> ValueHeads:
    """Split a flat checkpoint parameter dict back into head groups."""
    return ValueHeads(
        policy={k: v for k, v in params.items() if k.startswith("pi.")},
        cost_value={k: v for k, v in params.items() if k.startswith("vl.")},
        constraint_value={k: v for k, v in params.items() if k.startswith("vh.")},
        net_config=cfg,
    )


# ---------------------------------------------------------------------------
# total-value assembly


def total_value(vh: np.ndarray, vl: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Per-agent total value max{V^h, V^l - z}; broadcasts over agents."""
    return np.maximum(vh, vl - z)


def team_total_value(vh_per_agent: np.ndarray, vl: np.ndarray, z: np.ndarray,
                     agent_axis: int = -1) -> np.ndarray:
    """max over agents of the per-agent total value.

    Identical to max{max_i V^h_i, V^l - z}: the max over agents and the max
    in the assembly commute.
    """
    vl_b = np.expand_dims(vl, agent_axis)
    z_b = np.expand_dims(z, agent_axis)
    return total_value(vh_per_agent, vl_b, z_b).max(axis=agent_axis)


# ---------------------------------------------------------------------------
# graph batching helpers


def to_graph_batch(packed) -> GraphBatch:
    """Wrap the flat arrays produced by the env graph builders."""
    node_x, edge_x, senders, receivers, node_graph, centers = packed
    n_graphs = int(node_graph[-1]) + 1 if node_graph.size else 0
    return GraphBatch(
        node_x=node_x,
        edge_x=edge_x,
        senders=senders,
        receivers=receivers,
        node_graph=node_graph,
        n_graphs=n_graphs,
        centers=centers,
    )


def batch_graphs(graphs: list[AgentGraph]) -> GraphBatch:
    """Concatenate standalone observation graphs into one batch."""
    offsets = np.concatenate([[0], np.cumsum([g.n_nodes for g in graphs])])
    node_x = np.concatenate([g.node_features for g in graphs])
    edge_x = np.concatenate([g.edge_features for g in graphs])
    senders = np.concatenate([g.senders + off for g, off in zip(graphs, offsets)])
    receivers = np.concatenate([g.receivers + off for g, off in zip(graphs, offsets)])
    node_graph = np.concatenate(
        [np.full(g.n_nodes, i, dtype=np.intp) for i, g in enumerate(graphs)]
    )
    centers = np.array(
        [g.center + off for g, off in zip(graphs, offsets)], dtype=np.intp
    )
    return GraphBatch(
        node_x=node_x,
        edge_x=edge_x,
        senders=senders.astype(np.intp),
        receivers=receivers.astype(np.intp),
        node_graph=node_graph,
        n_graphs=len(graphs),
        centers=centers,
    )
