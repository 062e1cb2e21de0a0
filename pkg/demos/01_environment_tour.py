"""A tour of the particle tasks: resets, dynamics, safety margins, costs,
observation graphs, and trajectory logging.

Run:  python demos/01_environment_tour.py
"""

import numpy as np

from epimarl.env import (
    constraint_h,
    cost_l,
    episode_layout,
    evaluate,
    format_layout,
    make_params,
    observe,
    reset,
    step,
)
from epimarl.env.metrics import Trajectory, write_trajectory_csv

# Every task ships with its published geometry; corridor and connect_spread
# load fixed wall layouts from versioned files.
for task in ("target", "spread", "formation", "line", "corridor", "connect_spread"):
    params = make_params(task, n_agents=3)
    state = reset(params, seed=0)
    h = [constraint_h(state, i, params) for i in range(3)]
    print(f"{task:>15}: arena {params.arena_side}, obstacles "
          f"{state.obstacle_centers.shape[0]} x r={params.obstacle_radius}, "
          f"margins at reset {np.round(h, 3)}")

params = make_params("target", 3)
state = reset(params, seed=7)
print("\nThe sampled layout can be written out and re-read (plots use this):")
print(format_layout(episode_layout(state, params))[:200], "...\n")

# Margins jump by +/- nu at the boundary: approaching another agent flips
# the sign discontinuously at twice the agent radius.
for d in (0.3, 0.11, 0.1, 0.09):
    probe = reset(params, seed=7)
    probe.agent_pos[0] = np.array([0.0, 0.0])
    probe.agent_pos[1] = np.array([d, 0.0])
    print(f"inter-agent distance {d:4}: margin {constraint_h(probe, 0, params):+.3f}")

# A short random episode, logged the way eval logs episodes: T+1 records
# with a zero-control terminal record.
rng = np.random.default_rng(0)
T = 16
K = T + 1
logs = dict(states=np.zeros((K, 3, 4)), controls=np.zeros((K, 3, 2)),
            costs=np.zeros(K), margins=np.zeros((K, 3)))
s = state
for k in range(K):
    u = rng.uniform(-1, 1, (3, 2)) if k < T else np.zeros((3, 2))
    logs["states"][k] = np.concatenate([s.agent_pos, s.agent_vel], axis=1)
    logs["controls"][k] = u
    logs["costs"][k] = cost_l(s, u, params)
    logs["margins"][k] = [constraint_h(s, i, params) for i in range(3)]
    if k < T:
        s = step(s, u, params)

traj = Trajectory(steps=np.arange(K), z=np.full(K, np.nan), **logs)
cost, safety = evaluate(traj)
print(f"\nrandom episode: cumulative cost {cost:.4f}, safety rate {safety:.2f}")
write_trajectory_csv(traj, "runs/demo_episode.csv")
print("trajectory written to runs/demo_episode.csv")

g = observe(state, 0, params)
print(f"\nagent 0 observes {g.n_nodes} nodes / {g.n_edges} edges; "
      f"its own row: {np.round(g.node_features[g.center], 3)}")
