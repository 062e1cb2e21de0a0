"""Environment core: double-integrator dynamics, safety margins, team costs,
and communication-graph construction.

Everything is a pure function.  The heavy kernels operate on a ``VecState``
batch (leading env axis) so rollouts can advance many environments with a
few numpy calls; the single-environment operations wrap the same kernels
with a batch of one.

Safety margin convention: for each constraint category, the margin is a
linear function of distance plus a jump of +/- nu at the boundary, positive
when violated.  A category with no observed member contributes -inf and
drops out of the max.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .tasks import LINE_MIN_LANDMARK_SEPARATION, derive_goals, n_landmarks, task_layout
from .types import (
    AgentGraph,
    EnvParams,
    GlobalState,
    ONEHOT_AGENT,
    ONEHOT_GOAL,
    ONEHOT_OBSTACLE,
    PlacementInfeasibleError,
)

MAX_PLACEMENT_ATTEMPTS = 10_000


@dataclass
class VecState:
    """A batch of B environment instances with identical static geometry."""

    agent_pos: np.ndarray  # (B, N, 2)
    agent_vel: np.ndarray  # (B, N, 2)
    goals: np.ndarray  # (B, N, 2)
    obstacle_centers: np.ndarray  # (B, O, 2)
    obstacle_radii: np.ndarray  # (B, O)
    landmarks: np.ndarray  # (B, L, 2)
    step: np.ndarray  # (B,)

    @property
    def n_envs(self) -> int:
        return self.agent_pos.shape[0]

    @property
    def n_agents(self) -> int:
        return self.agent_pos.shape[1]

    def env(self, b: int) -> GlobalState:
        return GlobalState(
            agent_pos=self.agent_pos[b].copy(),
            agent_vel=self.agent_vel[b].copy(),
            goals=self.goals[b].copy(),
            obstacle_centers=self.obstacle_centers[b].copy(),
            obstacle_radii=self.obstacle_radii[b].copy(),
            landmarks=self.landmarks[b].copy(),
            step=int(self.step[b]),
        )


def stack_states(states: list[GlobalState]) -> VecState:
    return VecState(
        agent_pos=np.stack([s.agent_pos for s in states]),
        agent_vel=np.stack([s.agent_vel for s in states]),
        goals=np.stack([s.goals for s in states]),
        obstacle_centers=np.stack([s.obstacle_centers for s in states]),
        obstacle_radii=np.stack([s.obstacle_radii for s in states]),
        landmarks=np.stack([s.landmarks for s in states]),
        step=np.array([s.step for s in states], dtype=np.int64),
    )


def _single(state: GlobalState) -> VecState:
    return stack_states([state])


# ---------------------------------------------------------------------------
# dynamics


def clip_control(control: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(control, dtype=np.float64), -1.0, 1.0)


def step_vec(state: VecState, control: np.ndarray, params: EnvParams) -> VecState:
    """Explicit Euler step: p += v*dt with the pre-update velocity, then
    v += a*dt, both controls and velocities clipped to [-1, 1]."""
    u = clip_control(control)
    pos = state.agent_pos + state.agent_vel * params.dt
    vel = np.clip(state.agent_vel + u * params.dt, -1.0, 1.0)
    return replace(state, agent_pos=pos, agent_vel=vel, step=state.step + 1)


def step(state: GlobalState, control: np.ndarray, params: EnvParams) -> GlobalState:
    """Advance one environment by one step.  Pure: no hidden state."""
    if state.step >= params.horizon:
        raise ValueError(f"episode is over: step {state.step} >= horizon {params.horizon}")
    return step_vec(_single(state), np.asarray(control)[None], params).env(0)


# ---------------------------------------------------------------------------
# safety margins


def _jump(linear: np.ndarray, nu: float) -> np.ndarray:
    """margin = linear + nu*sign(linear); -inf stays -inf."""
    return linear + nu * np.sign(linear)


def safety_margins(state: VecState, params: EnvParams) -> np.ndarray:
    """Per-agent safety margin h, shape (B, N).  Positive means unsafe.

    Components (each only over members within the communication radius):
      * agent-agent:    2*r_a - min distance to another agent
      * agent-obstacle: r_a + r_o - min center distance to an obstacle
      * connectivity (connect_spread, N >= 2): the team-wide largest
        nearest-neighbor distance minus the connectivity threshold; computed
        from all agents and shared by every agent.
    Each linear part gets the +/- nu jump; h is the max of the present parts.
    """
    pos = state.agent_pos
    B, N = pos.shape[:2]
    R = params.comm_radius
    parts = []

    if N >= 2:
        diff = pos[:, :, None, :] - pos[:, None, :, :]
        d_aa = np.sqrt((diff * diff).sum(-1))  # (B, N, N)
        eye = np.eye(N, dtype=bool)
        d_obs = np.where(eye[None] | (d_aa > R), np.inf, d_aa)
        lin_a = 2.0 * params.agent_radius - d_obs.min(axis=2)  # -inf if none seen
        parts.append(_jump(lin_a, params.nu))

    if state.obstacle_centers.shape[1] > 0:
        diff = pos[:, :, None, :] - state.obstacle_centers[:, None, :, :]
        d_ao = np.sqrt((diff * diff).sum(-1))  # (B, N, O)
        reach = params.agent_radius + state.obstacle_radii[:, None, :] - d_ao
        lin_o = np.where(d_ao > R, -np.inf, reach).max(axis=2)
        parts.append(_jump(lin_o, params.nu))

    if params.task == "connect_spread" and N >= 2:
        diff = pos[:, :, None, :] - pos[:, None, :, :]
        d_aa = np.sqrt((diff * diff).sum(-1))
        d_aa = np.where(np.eye(N, dtype=bool)[None], np.inf, d_aa)
        nearest = d_aa.min(axis=2)  # (B, N)
        lin_c = nearest.max(axis=1, keepdims=True) - params.connect_radius
        parts.append(np.broadcast_to(_jump(lin_c, params.nu), (B, N)).copy())

    if not parts:
        return np.full((B, N), -np.inf)
    return np.max(np.stack(parts), axis=0)


def constraint_h(state: GlobalState, agent: int, params: EnvParams) -> float:
    """Safety margin of one agent; > 0 means the agent is unsafe."""
    if agent >= state.n_agents:
        raise IndexError(f"agent {agent} out of range for N={state.n_agents}")
    return float(safety_margins(_single(state), params)[0, agent])


# ---------------------------------------------------------------------------
# team cost


def _reach_cost(dist: np.ndarray) -> np.ndarray:
    # 0.01 * distance, plus 0.001 while more than 0.01 away from the goal
    return 0.01 * dist + 0.001 * (dist > 0.01)


COST_W_DISTANCE = 0.01
COST_W_REACH = 0.001
COST_W_CONTROL = 0.0001


def team_cost_vec(state: VecState, control: np.ndarray, params: EnvParams) -> np.ndarray:
    """Scalar team cost per env, shape (B,).

    Preassigned-goal tasks average the per-agent goal cost; all other tasks
    average, over goals, the cost of the goal's nearest agent.  Both add the
    mean squared-control penalty.  Controls are clipped first, matching what
    the dynamics actually apply.
    """
    u = clip_control(control)
    ctrl = COST_W_CONTROL * (u * u).sum(-1).mean(-1)  # (B,)
    if params.task == "target":
        d = np.linalg.norm(state.agent_pos - state.goals, axis=-1)  # (B, N)
        dist_term = _reach_cost(d).mean(axis=1)
    else:
        diff = state.agent_pos[:, :, None, :] - state.goals[:, None, :, :]
        d = np.sqrt((diff * diff).sum(-1))  # (B, agent, goal)
        dist_term = _reach_cost(d).min(axis=1).mean(axis=1)
    return dist_term + ctrl


def cost_l(state: GlobalState, control: np.ndarray, params: EnvParams) -> float:
    return float(team_cost_vec(_single(state), np.asarray(control)[None], params)[0])


# ---------------------------------------------------------------------------
# graphs


def _node_tables(state: VecState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(positions (B, n_tot, 2), velocities (B, n_tot, 2), onehots (n_tot, 3)).

    Node order: agents, goals, landmarks, obstacles.
    """
    B, N = state.agent_pos.shape[:2]
    G = state.goals.shape[1]
    L = state.landmarks.shape[1]
    O = state.obstacle_centers.shape[1]
    pos = np.concatenate(
        [state.agent_pos, state.goals, state.landmarks, state.obstacle_centers], axis=1
    )
    vel = np.zeros_like(pos)
    vel[:, :N] = state.agent_vel
    onehot = np.concatenate(
        [
            np.tile(ONEHOT_AGENT, (N, 1)),
            np.tile(ONEHOT_GOAL, (G + L, 1)),
            np.tile(ONEHOT_OBSTACLE, (O, 1)),
        ]
    )
    return pos, vel, onehot


def _agent_adjacency(pos: np.ndarray, n_agents: int, comm_radius: float) -> np.ndarray:
    """adj (B, N, n_tot): receiver agent r hears sender node s (r != s)."""
    diff = pos[:, :n_agents, None, :] - pos[:, None, :, :]
    d = np.sqrt((diff * diff).sum(-1))
    adj = d <= comm_radius
    idx = np.arange(n_agents)
    adj[:, idx, idx] = False
    return adj


def _pack_graphs(include: np.ndarray, edge_mask: np.ndarray, pos, vel, onehot,
                 centers_global: np.ndarray | None):
    """Flatten per-graph node/edge masks into the arrays of a graph batch.

    include:   (n_graphs, n_tot) node membership per graph.
    edge_mask: (n_graphs, N, n_tot) edges (receiver agent, sender node).
    pos/vel:   (n_graphs, n_tot, 2) node states per graph.
    centers_global: (n_graphs,) global node index of each readout node.
    Returns (node_x, edge_x, senders, receivers, node_graph, centers).
    """
    n_graphs, n_tot = include.shape
    counts = include.sum(axis=1)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    local_idx = np.cumsum(include, axis=1) - 1  # valid where include

    gid, nid = np.nonzero(include)
    node_x = np.concatenate(
        [pos[gid, nid], vel[gid, nid], np.broadcast_to(onehot, (n_graphs, n_tot, 3))[gid, nid]],
        axis=1,
    )
    eg, er, es = np.nonzero(edge_mask)
    receivers = offsets[eg] + local_idx[eg, er]
    senders = offsets[eg] + local_idx[eg, es]
    state_r = np.concatenate([pos[eg, er], vel[eg, er]], axis=1)
    state_s = np.concatenate([pos[eg, es], vel[eg, es]], axis=1)
    edge_x = state_r - state_s
    node_graph = gid
    centers = None
    if centers_global is not None:
        g = np.arange(n_graphs)
        centers = offsets[g] + local_idx[g, centers_global]
    return node_x, edge_x, senders, receivers, node_graph.astype(np.intp), centers


def observation_batch(state: VecState, params: EnvParams):
    """Observation graphs for every (env, agent) pair, as flat batch arrays.

    Graph (b, i) contains agent i, every node within the communication radius
    of agent i, and all (agent, node) edges of the global graph between
    included nodes (the induced subgraph of agent i's neighborhood).
    Graphs are ordered env-major: index b * N + i.
    """
    pos, vel, onehot = _node_tables(state)
    B, n_tot = pos.shape[:2]
    N = state.n_agents
    diff = pos[:, :N, None, :] - pos[:, None, :, :]
    d = np.sqrt((diff * diff).sum(-1))  # (B, N, n_tot)
    include = d <= params.comm_radius
    idx = np.arange(N)
    include[:, idx, idx] = True
    adj = _agent_adjacency(pos, N, params.comm_radius)
    edge_mask = (
        include[:, :, :N, None] & include[:, :, None, :] & adj[:, None, :, :]
    )  # (B, i, recv, send)

    n_graphs = B * N
    include_f = include.reshape(n_graphs, n_tot)
    edge_f = edge_mask.reshape(n_graphs, N, n_tot)
    pos_f = np.repeat(pos, N, axis=0)
    vel_f = np.repeat(vel, N, axis=0)
    centers_global = np.tile(np.arange(N), B)
    return _pack_graphs(include_f, edge_f, pos_f, vel_f, onehot, centers_global)


def global_batch(state: VecState, params: EnvParams):
    """One full communication graph per env, as flat batch arrays."""
    pos, vel, onehot = _node_tables(state)
    B, n_tot = pos.shape[:2]
    N = state.n_agents
    include = np.ones((B, n_tot), dtype=bool)
    edge_mask = _agent_adjacency(pos, N, params.comm_radius)
    return _pack_graphs(include, edge_mask, pos, vel, onehot, None)


def _graph_from_batch(packed, graph_index: int, n_graphs: int) -> AgentGraph:
    node_x, edge_x, senders, receivers, node_graph, centers = packed
    nodes = np.nonzero(node_graph == graph_index)[0]
    lo, hi = nodes[0], nodes[-1] + 1
    emask = (receivers >= lo) & (receivers < hi)
    return AgentGraph(
        node_features=node_x[lo:hi],
        receivers=receivers[emask] - lo,
        senders=senders[emask] - lo,
        edge_features=edge_x[emask],
        center=int(centers[graph_index] - lo) if centers is not None else -1,
    )


def observe(state: GlobalState, agent: int, params: EnvParams) -> AgentGraph:
    """Local observation graph of one agent."""
    if agent >= state.n_agents:
        raise IndexError(f"agent {agent} out of range for N={state.n_agents}")
    packed = observation_batch(_single(state), params)
    return _graph_from_batch(packed, agent, state.n_agents)


def global_graph(state: GlobalState, params: EnvParams) -> AgentGraph:
    """Full communication graph over all nodes (used by the central critic)."""
    packed = global_batch(_single(state), params)
    return _graph_from_batch(packed, 0, 1)


def agent_components(state: GlobalState, params: EnvParams) -> list[list[int]]:
    """Connected components of the agent-agent communication graph."""
    N = state.n_agents
    diff = state.agent_pos[:, None, :] - state.agent_pos[None, :, :]
    adj = np.sqrt((diff * diff).sum(-1)) <= params.comm_radius
    seen = np.zeros(N, dtype=bool)
    comps = []
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
        comps.append(sorted(comp))
    return comps


# ---------------------------------------------------------------------------
# reset


class _AttemptBudget:
    def __init__(self, limit: int = MAX_PLACEMENT_ATTEMPTS):
        self.left = limit

    def draw(self):
        self.left -= 1
        if self.left < 0:
            raise PlacementInfeasibleError(
                f"could not place entities safely within {MAX_PLACEMENT_ATTEMPTS} attempts; "
                "the arena is too crowded"
            )


def _sample_box(rng, box) -> np.ndarray:
    xmin, xmax, ymin, ymax = box
    return np.array([rng.uniform(xmin, xmax), rng.uniform(ymin, ymax)])


def _arena_box(params: EnvParams, margin: float = 0.0):
    half = params.arena_side / 2.0 - margin
    return (-half, half, -half, half)


def _place(rng, budget, box, clear_points, clear_dists) -> np.ndarray:
    """Sample a point in `box` farther than clear_dists[k] from every point
    in clear_points[k] (strict), charging the attempt budget per draw."""
    while True:
        budget.draw()
        p = _sample_box(rng, box)
        ok = True
        for pts, dist in zip(clear_points, clear_dists):
            if len(pts) and np.linalg.norm(pts - p, axis=1).min() <= dist:
                ok = False
                break
        if ok:
            return p


def reset(params: EnvParams, seed: int) -> GlobalState:
    """Sample a strictly safe initial state (all safety margins < 0).

    Entities are placed uniformly (inside their task regions where the task
    fixes them) with rejection sampling; obstacles keep enough clearance from
    goals that an agent sitting on a goal is safe.  Deterministic for a fixed
    seed.  Raises PlacementInfeasibleError after 10,000 failed draws.
    """
    rng = np.random.default_rng(seed)
    budget = _AttemptBudget()
    fixed = task_layout(params)
    arena = _arena_box(params)
    agent_box = fixed.regions["agents"] if fixed and "agents" in fixed.regions else arena
    goal_box = fixed.regions["goals"] if fixed and "goals" in fixed.regions else arena
    goal_clear = params.agent_radius + params.obstacle_radius

    while True:
        # landmarks, then goals (sampled or derived)
        n_lm = n_landmarks(params.task)
        if params.task == "formation":
            lm_box = _arena_box(params, margin=0.3)
            landmarks = np.array([_sample_box(rng, lm_box)])
        elif params.task == "line":
            a = _sample_box(rng, arena)
            while True:
                budget.draw()
                b = _sample_box(rng, arena)
                if np.linalg.norm(a - b) > LINE_MIN_LANDMARK_SEPARATION:
                    break
            landmarks = np.stack([a, b])
        else:
            landmarks = np.zeros((0, 2))

        if n_lm > 0:
            goals = derive_goals(params.task, landmarks, params.n_agents)
        else:
            goals = np.zeros((params.n_agents, 2))
            obst_pts = (
                np.asarray([o[:2] for o in fixed.obstacles]) if fixed else np.zeros((0, 2))
            )
            for g in range(params.n_agents):
                goals[g] = _place(rng, budget, goal_box, [obst_pts], [goal_clear])

        # obstacles: fixed by the task layout, or sampled clear of the goals
        if fixed is not None:
            centers, radii = fixed.obstacle_arrays()
        else:
            centers = np.zeros((params.n_obstacles, 2))
            radii = np.full(params.n_obstacles, params.obstacle_radius)
            for o in range(params.n_obstacles):
                centers[o] = _place(rng, budget, arena, [goals], [goal_clear])

        # agents: pairwise and obstacle clearance, strict
        agents = np.zeros((params.n_agents, 2))
        for i in range(params.n_agents):
            agents[i] = _place(
                rng,
                budget,
                agent_box,
                [agents[:i], centers],
                [2.0 * params.agent_radius, goal_clear],
            )

        state = GlobalState(
            agent_pos=agents,
            agent_vel=np.zeros_like(agents),
            goals=goals,
            obstacle_centers=centers,
            obstacle_radii=radii,
            landmarks=landmarks,
            step=0,
        )
        h = safety_margins(_single(state), params)[0]
        if np.all(h < 0.0):
            return state
        budget.draw()  # connectivity (or a boundary tie) failed: resample


def reset_many(params: EnvParams, seeds: list[int]) -> VecState:
    return stack_states([reset(params, s) for s in seeds])
