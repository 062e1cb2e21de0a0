"""Episode trajectories, evaluation metrics, and the trajectory CSV log.

The episode cost is the correctly rounded float64 sum of the logged step
costs (math.fsum), so any faithful recomputation from the CSV reproduces it
bit-exactly regardless of summation order.

A full episode of horizon T is logged as T+1 records k = 0..T: record k
holds the state x^k, the control applied at k (zero at the terminal record),
the team cost l(x^k, u^k), and every agent's safety margin at x^k.  The
episode cost is the sum of all logged costs and the safety rate is the
fraction of agents whose margin never goes positive.

CSV schema (fixed header, float64 round-trip via repr)::

    k, px0, py0, vx0, vy0, ..., z, ux0, uy0, ..., l, h1, ..., hN

``z`` is the team cost budget at that step (the component maximum during
distributed execution); NaN when the run does not track a budget.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass
class Trajectory:
    steps: np.ndarray  # (K,)
    states: np.ndarray  # (K, N, 4) rows [px, py, vx, vy]
    z: np.ndarray  # (K,)
    controls: np.ndarray  # (K, N, 2)
    costs: np.ndarray  # (K,)
    margins: np.ndarray  # (K, N)

    @property
    def n_agents(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.steps.shape[0]


def evaluate(traj: Trajectory) -> tuple[float, float]:
    """(cumulative cost, safety rate) of a logged trajectory.

    cost = sum of the logged per-step team costs; safety rate = fraction of
    agents with margin <= 0 at every logged step.
    """
    if len(traj) == 0:
        raise ValueError("cannot evaluate an empty trajectory")
    cost = math.fsum(traj.costs.tolist())
    safe_agents = np.all(traj.margins <= 0.0, axis=0)
    return cost, float(safe_agents.mean())


def trajectory_header(n_agents: int) -> list[str]:
    cols = ["k"]
    for i in range(n_agents):
        cols += [f"px{i}", f"py{i}", f"vx{i}", f"vy{i}"]
    cols.append("z")
    for i in range(n_agents):
        cols += [f"ux{i}", f"uy{i}"]
    cols.append("l")
    cols += [f"h{i + 1}" for i in range(n_agents)]
    return cols


def write_trajectory_csv(traj: Trajectory, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(trajectory_header(traj.n_agents))
        for k in range(len(traj)):
            row = [int(traj.steps[k])]
            row += [repr(float(v)) for v in traj.states[k].reshape(-1)]
            row.append(repr(float(traj.z[k])))
            row += [repr(float(v)) for v in traj.controls[k].reshape(-1)]
            row.append(repr(float(traj.costs[k])))
            row += [repr(float(v)) for v in traj.margins[k]]
            writer.writerow(row)


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    n_agents = sum(1 for c in header if c.startswith("px"))
    if header != trajectory_header(n_agents):
        raise ValueError(f"unexpected trajectory CSV header in {path}")
    K = len(rows)
    traj = Trajectory(
        steps=np.zeros(K, dtype=np.int64),
        states=np.zeros((K, n_agents, 4)),
        z=np.zeros(K),
        controls=np.zeros((K, n_agents, 2)),
        costs=np.zeros(K),
        margins=np.zeros((K, n_agents)),
    )
    for k, row in enumerate(rows):
        vals = [float(v) for v in row]
        traj.steps[k] = int(vals[0])
        i = 1
        traj.states[k] = np.array(vals[i : i + 4 * n_agents]).reshape(n_agents, 4)
        i += 4 * n_agents
        traj.z[k] = vals[i]
        i += 1
        traj.controls[k] = np.array(vals[i : i + 2 * n_agents]).reshape(n_agents, 2)
        i += 2 * n_agents
        traj.costs[k] = vals[i]
        i += 1
        traj.margins[k] = np.array(vals[i : i + n_agents])
    return traj
