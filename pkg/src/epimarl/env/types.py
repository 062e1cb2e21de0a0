"""Domain types for the particle multi-agent tasks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

TASKS = ("target", "spread", "formation", "line", "corridor", "connect_spread")

# Tasks whose cost matches each goal with its same-index agent; all other
# tasks score each goal against its nearest agent.
PREASSIGNED_GOAL_TASKS = ("target",)


class PlacementInfeasibleError(RuntimeError):
    """Raised when rejection sampling cannot place entities safely."""


@dataclass(frozen=True)
class AgentState:
    """Position (arena units) and velocity (units/s) of one agent.

    Velocity components stay in [-1, 1]; ``step`` enforces this by clipping.
    """

    position: np.ndarray
    velocity: np.ndarray

    @property
    def x(self) -> np.ndarray:
        """4-dim state vector [px, py, vx, vy]."""
        return np.concatenate([self.position, self.velocity])


@dataclass(frozen=True)
class EnvParams:
    """Static task parameters.

    Defaults follow the standard setup: agent radius 0.05, communication
    radius 0.5, dt 0.03 s, horizon 128, safety-margin jump nu 0.5.  Arena
    side and obstacle radius/count vary per task; use ``make_params``.
    """

    task: str
    n_agents: int
    agent_radius: float = 0.05
    comm_radius: float = 0.5
    arena_side: float = 1.5
    obstacle_radius: float = 0.05
    n_obstacles: int = 3
    connect_radius: float = 0.45  # connectivity threshold, connect_spread only
    dt: float = 0.03
    horizon: int = 128
    nu: float = 0.5
    hop_count: int = 2  # message-passing layers used by the policy

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if self.n_agents < 1:
            raise ValueError("n_agents must be >= 1")
        for name in ("agent_radius", "comm_radius", "dt", "horizon", "nu"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.n_obstacles > 0 and self.obstacle_radius <= 0:
            raise ValueError("obstacle_radius must be positive")


@dataclass(frozen=True)
class GlobalState:
    """Joint state of one environment instance.

    Arrays: agent_pos/agent_vel (N, 2), goals (N, 2), obstacle_centers (O, 2),
    obstacle_radii (O,), landmarks (L, 2).  ``step`` counts applied controls
    and stays in [0, horizon].
    """

    agent_pos: np.ndarray
    agent_vel: np.ndarray
    goals: np.ndarray
    obstacle_centers: np.ndarray
    obstacle_radii: np.ndarray
    landmarks: np.ndarray
    step: int = 0

    @property
    def n_agents(self) -> int:
        return self.agent_pos.shape[0]

    def agent(self, i: int) -> AgentState:
        return AgentState(self.agent_pos[i].copy(), self.agent_vel[i].copy())

    @property
    def agents(self) -> list[AgentState]:
        return [self.agent(i) for i in range(self.n_agents)]

    def with_step(self, step: int) -> "GlobalState":
        return replace(self, step=step)


# Node type one-hot codes, in feature order [obstacle, goal/landmark, agent].
ONEHOT_AGENT = (0.0, 0.0, 1.0)
ONEHOT_GOAL = (0.0, 1.0, 0.0)
ONEHOT_OBSTACLE = (1.0, 0.0, 0.0)

NODE_FEATURE_DIM = 7  # [px, py, vx, vy] + one-hot(3)
EDGE_FEATURE_DIM = 4  # relative state x_receiver - x_sender


@dataclass
class AgentGraph:
    """Directed observation graph.

    Nodes carry a 4-dim state (velocity slots zero for static nodes) plus a
    type one-hot.  An edge (receiver, sender) exists iff the receiver is an
    agent node, sender != receiver, and their distance is within the
    communication radius (inclusive).  Edges are sorted by (receiver, sender)
    local index.  ``center`` is the local index of the observing agent, or -1
    for the full global graph which is consumed through mean pooling.
    """

    node_features: np.ndarray  # (n, 7)
    receivers: np.ndarray  # (E,)
    senders: np.ndarray  # (E,)
    edge_features: np.ndarray  # (E, 4)
    center: int = -1
    global_indices: np.ndarray = field(default=None)  # (n,) provenance, optional

    @property
    def n_nodes(self) -> int:
        return self.node_features.shape[0]

    @property
    def n_edges(self) -> int:
        return self.receivers.shape[0]


Control = np.ndarray  # (N, 2) per-agent acceleration, clipped to [-1, 1]
