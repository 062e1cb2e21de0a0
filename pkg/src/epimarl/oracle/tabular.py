"""Tiny discrete two-agent control problems with exhaustively enumerable
joint action sequences.

Two agents move on a line of 5-7 cells with per-agent actions {-1, 0, +1}
and deterministic clipped transitions over a horizon of at most 6 steps.
Costs are tabulated per (state, joint action) and safety margins per agent
per state, taking values -nu when safe and nu-plus-jitter when unsafe
(collisions are always unsafe for both agents).

All costs and margins are multiples of 1/16, so every sum and difference the
oracles form is exactly representable in float64: cross-checks between
independent solvers can demand exact equality instead of tolerances.

With deterministic dynamics and a fixed start state, open-loop action
sequences and closed-loop policies achieve the same values, so enumerating
the 9^H sequences solves the policy optimization exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIONS = (-1, 0, 1)
N_JOINT = 9  # 3 actions per agent, two agents
QUANTUM = 0.0625  # 1/16: the exactly-representable value grid
MAX_SEQUENCES = 1_000_000


@dataclass(frozen=True)
class TabularMAS:
    n_cells: int
    horizon: int
    l_table: np.ndarray  # (n_cells, n_cells, 9) nonnegative step costs
    h_table: np.ndarray  # (2, n_cells, n_cells) per-agent safety margins
    nu: float = 0.5

    @property
    def n_sequences(self) -> int:
        return N_JOINT**self.horizon

    def margins(self, c1: np.ndarray, c2: np.ndarray) -> np.ndarray:
        """(2, ...) per-agent margins at the given joint states."""
        return self.h_table[:, c1, c2]


def joint_action(index: int) -> tuple[int, int]:
    """Decode a joint action id 0..8 into the two agents' moves."""
    return ACTIONS[index // 3], ACTIONS[index % 3]


def step_cells(c1, c2, action_index, n_cells: int):
    a1 = np.asarray(action_index) // 3 - 1
    a2 = np.asarray(action_index) % 3 - 1
    return np.clip(c1 + a1, 0, n_cells - 1), np.clip(c2 + a2, 0, n_cells - 1)


def generate_instance(seed: int) -> tuple[TabularMAS, tuple[int, int]]:
    """Random instance plus a safe start state.

    Unsafe margins are nu + k/16 for k in 1..4; safe margins are exactly -nu.
    Each cell is unsafe for each agent independently with probability 0.15,
    and co-location is unsafe for both agents.
    """
    rng = np.random.default_rng(seed)
    n_cells = int(rng.integers(5, 8))
    horizon = int(rng.integers(3, 5))
    nu = 0.5
    l_table = rng.integers(0, 16, size=(n_cells, n_cells, N_JOINT)) * QUANTUM

    h_table = np.full((2, n_cells, n_cells), -nu)
    cells = np.arange(n_cells)
    for agent in range(2):
        unsafe_cells = rng.random(n_cells) < 0.15
        jitter = rng.integers(1, 5, size=n_cells) * QUANTUM
        vals = np.where(unsafe_cells, nu + jitter, -nu)
        if agent == 0:
            h_table[0] = np.maximum(h_table[0], vals[:, None])
        else:
            h_table[1] = np.maximum(h_table[1], vals[None, :])
    collide = cells[:, None] == cells[None, :]
    collide_val = nu + rng.integers(1, 5) * QUANTUM
    h_table[:, collide] = collide_val

    mas = TabularMAS(n_cells=n_cells, horizon=horizon, l_table=l_table, h_table=h_table, nu=nu)
    safe = np.argwhere(mas.h_table.max(axis=0) <= 0.0)
    x0 = tuple(int(v) for v in safe[rng.integers(0, len(safe))])
    return mas, x0


@dataclass
class SequenceTable:
    """Exhaustive evaluation of every open-loop joint action sequence.

    Sequence s is encoded base-9 with step 0 as the most significant digit,
    so ascending index order is lexicographic order over the action tuples
    ((-1,-1) < (-1,0) < ... < (1,1) per step); np.argmin's first-hit rule
    therefore breaks ties lexicographically.
    """

    suml: np.ndarray  # (S,) total cost of each sequence
    maxh_agents: np.ndarray  # (S, 2) per-agent max margin along the trajectory
    horizon: int

    @property
    def maxh(self) -> np.ndarray:
        return self.maxh_agents.max(axis=1)

    @property
    def n_sequences(self) -> int:
        return self.suml.shape[0]


def enumerate_sequences(mas: TabularMAS, x0: tuple[int, int]) -> SequenceTable:
    """Vectorized rollout of all 9^H sequences from x0."""
    S = mas.n_sequences
    if S > MAX_SEQUENCES:
        raise ValueError(
            f"{S} sequences exceed the enumeration bound {MAX_SEQUENCES}"
        )
    seq = np.arange(S)
    c1 = np.full(S, x0[0])
    c2 = np.full(S, x0[1])
    suml = np.zeros(S)
    maxh = mas.margins(c1, c2).T.copy()  # (S, 2), margins at x0
    for k in range(mas.horizon):
        digit = (seq // N_JOINT ** (mas.horizon - 1 - k)) % N_JOINT
        suml = suml + mas.l_table[c1, c2, digit]
        c1, c2 = step_cells(c1, c2, digit, mas.n_cells)
        maxh = np.maximum(maxh, mas.margins(c1, c2).T)
    return SequenceTable(suml=suml, maxh_agents=maxh, horizon=mas.horizon)


def decode_sequence(index: int, horizon: int) -> list[tuple[int, int]]:
    out = []
    for k in range(horizon):
        digit = (index // N_JOINT ** (horizon - 1 - k)) % N_JOINT
        out.append(joint_action(int(digit)))
    return out


def sequence_trajectory(mas: TabularMAS, x0: tuple[int, int], index: int
                        ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """States (H+1, 2), step costs (H,), per-agent margins (H+1, 2)."""
    c1, c2 = x0
    states = [(c1, c2)]
    costs = []
    for k in range(mas.horizon):
        digit = (index // N_JOINT ** (mas.horizon - 1 - k)) % N_JOINT
        costs.append(mas.l_table[c1, c2, digit])
        c1, c2 = step_cells(c1, c2, digit, mas.n_cells)
        states.append((int(c1), int(c2)))
    states = np.array(states)
    margins = mas.h_table[:, states[:, 0], states[:, 1]].T
    return states, np.array(costs), margins


def build_zgrid(table: SequenceTable, nu: float) -> np.ndarray:
    """Budget grid finer than half the smallest gap between distinct
    achievable costs, anchored so every achievable cost is a grid point, and
    covering well beyond every achievable cost on both sides so all relevant
    thresholds are interior.

    All costs are multiples of the value quantum, so a step of half the
    quantum divides every per-instance cost gap exactly.
    """
    costs = np.unique(table.suml)
    dz = QUANTUM / 2.0
    steps_below = int(np.ceil((2.0 * nu) / dz)) + 4
    lo = costs.min() - steps_below * dz
    n = steps_below + int(round((costs.max() - costs.min()) / dz)) + steps_below + 1
    return lo + dz * np.arange(n)
