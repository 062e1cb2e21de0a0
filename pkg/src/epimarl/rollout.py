"""Trajectory collection under the coupled state/budget dynamics.

Each of ``n_envs`` environments starts from a fresh safe reset and a budget
z^0 drawn uniformly from the training range; at every step the policy acts
on (o_i, z), the environment advances, and the budget follows
z^{k+1} = z^k - l(x^k, u^k).  The batch stores the observation and global
graphs for steps 0..T (step T only feeds value bootstraps), so the training
update can re-run forwards on exactly the data the policy saw.

Also home to the two exact identities every batch satisfies and the
training-range estimate for z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env.core import (
    COST_W_CONTROL,
    COST_W_DISTANCE,
    COST_W_REACH,
    global_batch,
    observation_batch,
    reset,
    safety_margins,
    stack_states,
    step_vec,
    team_cost_vec,
)
from .env.metrics import Trajectory, trajectory_header
from .env.types import EnvParams
from .models import NetConfig, policy_distribution, to_graph_batch
from .nn.layers import GraphBatch

Z_MIN_DEFAULT = -0.5
U_MAX_SQ = 2.0  # max ||u||^2 with both components saturated


class RolloutDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ZRange:
    """Budget sampling interval used during training."""

    z_min: float
    z_max: float

    def __post_init__(self):
        if not self.z_min < self.z_max:
            raise ValueError(f"z_min {self.z_min} must be < z_max {self.z_max}")


def estimate_zmax(params: EnvParams, w_distance: float = COST_W_DISTANCE,
                  w_reach: float = COST_W_REACH, w_control: float = COST_W_CONTROL) -> float:
    """Conservative per-episode cost bound: worst step cost times the horizon.

    The worst step assumes the largest possible agent-goal distance (the
    arena diagonal), the reach bonus never earned, and saturated controls.
    """
    init_dist_max = params.arena_side * np.sqrt(2.0)
    l_max = init_dist_max * w_distance + w_reach + U_MAX_SQ * w_control
    return float(l_max * params.horizon)


def default_zrange(params: EnvParams) -> ZRange:
    return ZRange(Z_MIN_DEFAULT, estimate_zmax(params))


@dataclass
class RolloutBatch:
    """On-policy batch from n_envs fixed-horizon episodes.

    Graph batches are step-major: observation graph t*(B*N) + b*N + i, global
    graph t*B + b, for t = 0..T inclusive.  ``margins`` covers steps 0..T;
    actions, log-probs and costs cover 0..T-1.  ``truncated`` marks the
    horizon cut (these tasks never terminate early).
    """

    obs: GraphBatch
    glob: GraphBatch
    states: np.ndarray  # (B, T+1, N, 4)
    z: np.ndarray  # (B, T+1)
    actions: np.ndarray  # (B, T, N, 2)
    u_pre: np.ndarray  # (B, T, N, 2)
    log_probs: np.ndarray  # (B, T, N)
    costs: np.ndarray  # (B, T)
    margins: np.ndarray  # (B, T+1, N)
    truncated: np.ndarray  # (B, T)
    z0: np.ndarray  # (B,)
    seed: int

    @property
    def n_envs(self) -> int:
        return self.z.shape[0]

    @property
    def horizon(self) -> int:
        return self.costs.shape[1]

    @property
    def n_agents(self) -> int:
        return self.margins.shape[2]

    @property
    def n_transitions(self) -> int:
        return self.n_envs * self.horizon

    def obs_z(self) -> np.ndarray:
        """Budget per observation graph, aligned with ``obs`` ordering."""
        return np.repeat(self.z.T.reshape(-1), self.n_agents)

    def glob_z(self) -> np.ndarray:
        return self.z.T.reshape(-1)


def concat_graph_batches(batches: list[GraphBatch]) -> GraphBatch:
    node_off = np.concatenate([[0], np.cumsum([b.n_nodes for b in batches])])
    graph_off = np.concatenate([[0], np.cumsum([b.n_graphs for b in batches])])
    return GraphBatch(
        node_x=np.concatenate([b.node_x for b in batches]),
        edge_x=np.concatenate([b.edge_x for b in batches]),
        senders=np.concatenate([b.senders + o for b, o in zip(batches, node_off)]),
        receivers=np.concatenate([b.receivers + o for b, o in zip(batches, node_off)]),
        node_graph=np.concatenate([b.node_graph + o for b, o in zip(batches, graph_off)]),
        n_graphs=int(graph_off[-1]),
        centers=(
            np.concatenate([b.centers + o for b, o in zip(batches, node_off)])
            if batches[0].centers is not None
            else None
        ),
    )


def collect(heads, params: EnvParams, zrange: ZRange, n_envs: int, seed: int,
            freeze_z: bool = False) -> RolloutBatch:
    """Roll out n_envs episodes with the current stochastic policy.

    With ``freeze_z`` the budget is pinned to zero for the whole batch
    (baseline trainers do not condition on it).  All randomness flows from
    one generator seeded with ``seed``; two calls with equal arguments return
    identical batches.
    """
    rng = np.random.default_rng(seed)
    T, N, B = params.horizon, params.n_agents, n_envs
    env_seeds = rng.integers(0, 2**62, size=B)
    states = stack_states([reset(params, int(s)) for s in env_seeds])
    if freeze_z:
        z0 = np.zeros(B)
    else:
        z0 = rng.uniform(zrange.z_min, zrange.z_max, size=B)

    cfg: NetConfig = heads.net_config
    obs_parts, glob_parts = [], []
    z = np.zeros((B, T + 1))
    z[:, 0] = z0
    states_log = np.zeros((B, T + 1, N, 4))
    actions = np.zeros((B, T, N, 2))
    u_pre_log = np.zeros((B, T, N, 2))
    log_probs = np.zeros((B, T, N))
    costs = np.zeros((B, T))
    margins = np.zeros((B, T + 1, N))

    for t in range(T):
        obs_gb = to_graph_batch(observation_batch(states, params))
        glob_gb = to_graph_batch(global_batch(states, params))
        obs_parts.append(obs_gb)
        glob_parts.append(glob_gb)
        margins[:, t] = safety_margins(states, params)
        states_log[:, t] = np.concatenate([states.agent_pos, states.agent_vel], axis=-1)

        dist = policy_distribution(heads.policy, obs_gb, np.repeat(z[:, t], N), cfg)
        if not np.all(np.isfinite(dist.mean)):
            bad = np.nonzero(~np.isfinite(dist.mean).all(axis=1))[0][0]
            raise RolloutDivergedError(
                f"policy produced non-finite output at step {t}, graph {bad} "
                f"(env {bad // N}, agent {bad % N})"
            )
        u_pre, act = dist.sample(rng)
        logp = dist.log_prob(u_pre)
        actions[:, t] = act.reshape(B, N, 2)
        u_pre_log[:, t] = u_pre.reshape(B, N, 2)
        log_probs[:, t] = logp.reshape(B, N)

        l_t = team_cost_vec(states, actions[:, t], params)
        costs[:, t] = l_t
        states = step_vec(states, actions[:, t], params)
        z[:, t + 1] = z[:, t] if freeze_z else z[:, t] - l_t

    obs_parts.append(to_graph_batch(observation_batch(states, params)))
    glob_parts.append(to_graph_batch(global_batch(states, params)))
    margins[:, T] = safety_margins(states, params)
    states_log[:, T] = np.concatenate([states.agent_pos, states.agent_vel], axis=-1)

    truncated = np.zeros((B, T), dtype=bool)
    truncated[:, T - 1] = True
    return RolloutBatch(
        obs=concat_graph_batches(obs_parts),
        glob=concat_graph_batches(glob_parts),
        states=states_log,
        z=z,
        actions=actions,
        u_pre=u_pre_log,
        log_probs=log_probs,
        costs=costs,
        margins=margins,
        truncated=truncated,
        z0=z0,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# exact identities on collected batches


def telescoping_gap(batch: RolloutBatch) -> float:
    """Max |z^k - (z^0 - sum_{p<k} l^p)| over the batch; 0 up to roundoff."""
    expected = batch.z0[:, None] - np.concatenate(
        [np.zeros((batch.n_envs, 1)), np.cumsum(batch.costs, axis=1)], axis=1
    )
    return float(np.abs(batch.z - expected).max())


def suffix_total_values(costs: np.ndarray, margins_max: np.ndarray, z: np.ndarray
                        ) -> np.ndarray:
    """Finite-horizon total value from the definition, (B, T+1).

    V^k = max(max_{p>=k} h^p, sum_{p=k}^{T-1} l^p - z^k), with the empty
    terminal cost sum equal to zero.
    """
    B, T = costs.shape
    suffix_h = np.flip(np.maximum.accumulate(np.flip(margins_max, axis=1), axis=1), axis=1)
    suffix_l = np.concatenate(
        [np.flip(np.cumsum(np.flip(costs, axis=1), axis=1), axis=1), np.zeros((B, 1))],
        axis=1,
    )
    return np.maximum(suffix_h, suffix_l - z)


def recursion_total_values(costs: np.ndarray, margins_max: np.ndarray, z: np.ndarray
                           ) -> np.ndarray:
    """Same quantity via the backward recursion V^k = max(h^k, V^{k+1}) with
    the budget update folded into the stored z sequence."""
    B, T = costs.shape
    out = np.zeros((B, T + 1))
    out[:, T] = np.maximum(margins_max[:, T], -z[:, T])
    for k in range(T - 1, -1, -1):
        out[:, k] = np.maximum(margins_max[:, k], out[:, k + 1])
    return out


def budget_recursion_gap(costs: np.ndarray, margins: np.ndarray, z: np.ndarray) -> float:
    """Max deviation between the suffix definition and the backward recursion."""
    hmax = margins.max(axis=2)
    va = suffix_total_values(costs, hmax, z)
    vb = recursion_total_values(costs, hmax, z)
    return float(np.abs(va - vb).max())


# ---------------------------------------------------------------------------
# debug dump


def write_batch_csv(batch: RolloutBatch, env: int, path) -> None:
    """Dump one env of a batch in the trajectory CSV schema plus log-probs.

    The terminal row has zero controls, NaN cost and NaN log-probs (no action
    was taken there).
    """
    import csv
    from pathlib import Path

    N, T = batch.n_agents, batch.horizon
    header = trajectory_header(N) + [f"logp{i}" for i in range(N)]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(T + 1):
            row = [k]
            row += [repr(float(v)) for v in batch.states[env, k].reshape(-1)]
            row.append(repr(float(batch.z[env, k])))
            u = batch.actions[env, k] if k < T else np.zeros((N, 2))
            row += [repr(float(v)) for v in u.reshape(-1)]
            row.append(repr(float(batch.costs[env, k])) if k < T else "nan")
            row += [repr(float(v)) for v in batch.margins[env, k]]
            row += (
                [repr(float(v)) for v in batch.log_probs[env, k]] if k < T else ["nan"] * N
            )
            writer.writerow(row)


def batch_env_trajectory(batch: RolloutBatch, env: int) -> Trajectory:
    """View one env of a training batch as a metrics trajectory (T+1 records;
    the terminal record carries zero control and zero cost)."""
    N, T = batch.n_agents, batch.horizon
    return Trajectory(
        steps=np.arange(T + 1),
        states=batch.states[env],
        z=batch.z[env],
        controls=np.concatenate([batch.actions[env], np.zeros((1, N, 2))]),
        costs=np.concatenate([batch.costs[env], [0.0]]),
        margins=batch.margins[env],
    )
