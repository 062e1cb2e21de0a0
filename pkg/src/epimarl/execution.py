"""Distributed execution: per-agent budget solving and policy rollout.

At every step each agent finds the smallest cost budget its constraint
critic certifies as safe, i.e. the smallest z in [z_min, z_max] with
V^h(o_i, z) <= -xi (xi buffers against critic error; 0 <= xi <= nu).  The
bracket endpoints decide fast paths: already feasible at z_min, or
infeasible everywhere (fall back to the most conservative budget z_max and
flag it).  Otherwise a sign change exists and Chandrupatla's method finds
the crossing.

Optionally, agents connected in the communication graph adopt the maximum
budget of their component (max-consensus); by default each agent keeps its
own budget.  Actions use the distribution mode.

The budget enters the critic only after message passing, so one embedding
pass per step serves every budget query of that step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .env.core import (
    global_batch,
    observation_batch,
    reset,
    safety_margins,
    stack_states,
    step_vec,
    team_cost_vec,
)
from .env.metrics import Trajectory, evaluate
from .env.types import AgentGraph, EnvParams
from .models import (
    NetConfig,
    ValueHeads,
    batch_graphs,
    policy_distribution,
    to_graph_batch,
    vh_embedding,
    vh_from_embedding,
)
from .rollout import ZRange
from .rootfind import find_root_with_stats


@dataclass(frozen=True)
class ZSolverConfig:
    z_min: float
    z_max: float
    xi: float = 0.4
    nu: float = 0.5
    tol: float = 1e-6
    max_iters: int = 100
    communicate_z: bool = False

    def __post_init__(self):
        if not 0.0 <= self.xi <= self.nu:
            raise ValueError(f"xi must lie in [0, nu]=[0, {self.nu}], got {self.xi}")
        if not self.z_min < self.z_max:
            raise ValueError("z_min must be < z_max")


def solver_config_for(zrange: ZRange, **overrides) -> ZSolverConfig:
    return ZSolverConfig(z_min=zrange.z_min, z_max=zrange.z_max, **overrides)


@dataclass
class BudgetSolve:
    z: float
    feasible: bool
    evals: int


@dataclass
class ZSolveResult:
    """Per-step outcome of the distributed budget solves for one env."""

    z: np.ndarray  # (N,) budgets actually used by the agents
    feasible: np.ndarray  # (N,) bool
    iterations: int  # critic head evaluations spent this step
    consensus_z: float | None = None  # max over all agents, if communication is on


def solve_budget(vh_fn, config: ZSolverConfig, f_lo: float | None = None,
                 f_hi: float | None = None) -> BudgetSolve:
    """Smallest budget with vh_fn(z) <= -xi on the configured bracket.

    vh_fn is any scalar function of z (the critic, or a stub in tests).
    f_lo/f_hi are optional precomputed values of vh_fn + xi at the bracket
    ends (they do not count as evaluations when given).
    """
    g = lambda z: vh_fn(z) + config.xi
    evals = 0
    if f_lo is None:
        f_lo = g(config.z_min)
        evals += 1
    if f_lo <= 0.0:
        return BudgetSolve(config.z_min, True, evals)
    if f_hi is None:
        f_hi = g(config.z_max)
        evals += 1
    if f_hi > 0.0:
        return BudgetSolve(config.z_max, False, evals)
    root, n = find_root_with_stats(
        g, config.z_min, config.z_max, tol=config.tol, max_iters=config.max_iters,
        f_lo=f_lo, f_hi=f_hi,
    )
    return BudgetSolve(float(root), True, evals + n)


def solve_zi(constraint_params: dict, obs: AgentGraph, config: ZSolverConfig,
             net_config: NetConfig) -> tuple[float, bool]:
    """Budget solve for one agent's observation graph; (z_i, feasible)."""
    gb = batch_graphs([obs])
    emb = vh_embedding(constraint_params, gb, net_config)[0]

    def vh_fn(z):
        v = vh_from_embedding(constraint_params, emb, z, net_config)[0]
        if not np.isfinite(v):
            raise FloatingPointError(f"constraint critic returned {v} at z={z}")
        return float(v)

    res = solve_budget(vh_fn, config)
    return res.z, res.feasible


def _solve_step_budgets(constraint_params: dict, embs: np.ndarray,
                        config: ZSolverConfig, net_config: NetConfig
                        ) -> tuple[np.ndarray, np.ndarray, int]:
    """Vectorized bracket checks + per-agent root solves for one step.

    embs (M, D) are the critic embeddings of all (env, agent) graphs in the
    step.  Returns (z (M,), feasible (M,), total head evaluations).
    """
    M = embs.shape[0]
    g_lo = vh_from_embedding(constraint_params, embs, config.z_min, net_config) + config.xi
    g_hi = vh_from_embedding(constraint_params, embs, config.z_max, net_config) + config.xi
    if not (np.all(np.isfinite(g_lo)) and np.all(np.isfinite(g_hi))):
        raise FloatingPointError("constraint critic returned a non-finite value")
    evals = 2 * M
    z = np.full(M, config.z_min)
    feasible = np.ones(M, dtype=bool)
    needs_root = ~(g_lo <= 0.0)
    z[needs_root & (g_hi > 0.0)] = config.z_max
    feasible[needs_root & (g_hi > 0.0)] = False
    for m in np.nonzero(needs_root & (g_hi <= 0.0))[0]:
        emb = embs[m]
        fn = lambda zz: float(vh_from_embedding(constraint_params, emb, zz, net_config)[0])
        res = solve_budget(fn, config, f_lo=float(g_lo[m]), f_hi=float(g_hi[m]))
        z[m] = res.z
        evals += res.evals
    return z, feasible, evals


def _components(pos: np.ndarray, comm_radius: float) -> list[np.ndarray]:
    """Connected components of one env's agent-agent communication graph."""
    N = pos.shape[0]
    diff = pos[:, None, :] - pos[None, :, :]
    adj = np.sqrt((diff * diff).sum(-1)) <= comm_radius
    seen = np.zeros(N, dtype=bool)
    out = []
    for i in range(N):
        if seen[i]:
            continue
        stack, comp = [i], []
        seen[i] = True
        while stack:
            a = stack.pop()
            comp.append(a)
            for b in np.nonzero(adj[a] & ~seen)[0]:
                seen[b] = True
                stack.append(int(b))
        out.append(np.array(sorted(comp)))
    return out


def consensus_budgets(z: np.ndarray, pos: np.ndarray, comm_radius: float) -> np.ndarray:
    """Each agent adopts the max budget over its connected component."""
    out = z.copy()
    for comp in _components(pos, comm_radius):
        out[comp] = z[comp].max()
    return out


@dataclass
class ExecutionResult:
    trajectories: list[Trajectory]
    costs: np.ndarray  # (episodes,)
    safety_rates: np.ndarray  # (episodes,)
    z_traces: np.ndarray  # (episodes, T+1, N) budgets used per step
    feasible_fraction: float
    solver_evals_per_step: float
    initial_states: list = field(default_factory=list)  # GlobalState per episode
    solve_results: list[list[ZSolveResult]] = field(default_factory=list)


def execute(heads: ValueHeads, params: EnvParams, config: ZSolverConfig, seed: int,
            n_episodes: int = 1, fixed_z: float | None = None,
            keep_solve_results: bool = False) -> ExecutionResult:
    """Run deterministic-policy episodes with per-step distributed budgets.

    ``fixed_z`` skips the solver and pins every budget (baselines condition
    on z = 0).  Episodes are vectorized; results are per episode, with a
    terminal record at the horizon carrying zero control.
    """
    rng = np.random.default_rng(seed)
    T, N, B = params.horizon, params.n_agents, n_episodes
    cfg = heads.net_config
    initial = [reset(params, int(s)) for s in rng.integers(0, 2**62, size=B)]
    states = stack_states(initial)

    z_traces = np.zeros((B, T + 1, N))
    margins = np.zeros((B, T + 1, N))
    costs = np.zeros((B, T + 1))
    states_log = np.zeros((B, T + 1, N, 4))
    controls = np.zeros((B, T + 1, N, 2))
    solve_log: list[list[ZSolveResult]] = [[] for _ in range(B)]
    total_evals = 0
    infeasible = 0
    n_solves = 0

    for k in range(T + 1):
        obs_gb = to_graph_batch(observation_batch(states, params))
        margins[:, k] = safety_margins(states, params)
        states_log[:, k] = np.concatenate([states.agent_pos, states.agent_vel], axis=-1)

        if fixed_z is not None:
            z_step = np.full((B, N), float(fixed_z))
            feasible = np.ones((B, N), dtype=bool)
        else:
            embs = vh_embedding(heads.constraint_value, obs_gb, cfg)
            z_flat, feas_flat, evals = _solve_step_budgets(
                heads.constraint_value, embs, config, cfg
            )
            total_evals += evals
            n_solves += B * N
            infeasible += int((~feas_flat).sum())
            z_step = z_flat.reshape(B, N)
            feasible = feas_flat.reshape(B, N)
            if config.communicate_z:
                for b in range(B):
                    z_step[b] = consensus_budgets(z_step[b], states.agent_pos[b],
                                                  params.comm_radius)
        z_traces[:, k] = z_step
        if keep_solve_results:
            for b in range(B):
                solve_log[b].append(
                    ZSolveResult(
                        z=z_step[b].copy(),
                        feasible=feasible[b].copy(),
                        iterations=0 if fixed_z is not None else evals,
                        consensus_z=float(z_step[b].max()) if config.communicate_z else None,
                    )
                )

        if k == T:
            costs[:, k] = team_cost_vec(states, np.zeros((B, N, 2)), params)
            break
        dist = policy_distribution(heads.policy, obs_gb, z_step.reshape(-1), cfg)
        act = dist.mode().reshape(B, N, 2)
        controls[:, k] = act
        costs[:, k] = team_cost_vec(states, act, params)
        states = step_vec(states, act, params)

    trajectories = []
    ep_costs = np.zeros(B)
    ep_safety = np.zeros(B)
    for b in range(B):
        traj = Trajectory(
            steps=np.arange(T + 1),
            states=states_log[b],
            z=z_traces[b].max(axis=1),  # team budget column: component max
            controls=controls[b],
            costs=costs[b],
            margins=margins[b],
        )
        trajectories.append(traj)
        ep_costs[b], ep_safety[b] = evaluate(traj)

    return ExecutionResult(
        trajectories=trajectories,
        costs=ep_costs,
        safety_rates=ep_safety,
        z_traces=z_traces,
        feasible_fraction=1.0 - (infeasible / n_solves if n_solves else 0.0),
        solver_evals_per_step=total_evals / max(1, (T + 1) * B),
        initial_states=initial,
        solve_results=solve_log,
    )
