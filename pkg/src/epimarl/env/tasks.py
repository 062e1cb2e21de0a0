"""Task registry: per-task parameter defaults and fixed layouts.

Six tasks are supported.  ``target`` scores each agent against its
same-index goal; every other task uses the nearest-agent-per-goal cost.
``formation`` derives goals from one landmark (evenly spaced on a circle),
``line`` from two landmarks (evenly spaced on the segment between them).
``corridor`` and ``connect_spread`` load fixed wall obstacles and sampling
regions from versioned layout files shipped with the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .layout import Layout, load_layout
from .types import EnvParams

FORMATION_CIRCLE_RADIUS = 0.3
LINE_MIN_LANDMARK_SEPARATION = 0.5


@dataclass(frozen=True)
class TaskSpec:
    arena_side: float
    obstacle_radius: float
    n_obstacles: int
    n_landmarks: int
    layout_file: str | None = None
    default_updates: int = 200_000


TASK_SPECS: dict[str, TaskSpec] = {
    "target": TaskSpec(1.5, 0.05, 3, 0, default_updates=100_000),
    "spread": TaskSpec(1.5, 0.05, 3, 0, default_updates=100_000),
    "formation": TaskSpec(1.5, 0.05, 3, 1, default_updates=200_000),
    "line": TaskSpec(1.5, 0.05, 3, 2, default_updates=150_000),
    "corridor": TaskSpec(1.0, 0.4, 2, 0, layout_file="corridor.layout"),
    "connect_spread": TaskSpec(1.0, 0.25, 1, 0, layout_file="connect_spread.layout"),
}


def make_params(task: str, n_agents: int, **overrides) -> EnvParams:
    """EnvParams with the task's default arena and obstacle geometry."""
    spec = TASK_SPECS.get(task)
    if spec is None:
        raise ValueError(f"unknown task {task!r}; expected one of {tuple(TASK_SPECS)}")
    kwargs = dict(
        task=task,
        n_agents=n_agents,
        arena_side=spec.arena_side,
        obstacle_radius=spec.obstacle_radius,
        n_obstacles=spec.n_obstacles,
    )
    kwargs.update(overrides)
    return EnvParams(**kwargs)


def task_layout(params: EnvParams) -> Layout | None:
    """Fixed layout for the task, or None when everything is sampled."""
    spec = TASK_SPECS[params.task]
    if spec.layout_file is None:
        return None
    ref = resources.files("epimarl.env").joinpath("layouts", spec.layout_file)
    with resources.as_file(ref) as path:
        return load_layout(path)


def n_landmarks(task: str) -> int:
    return TASK_SPECS[task].n_landmarks


def default_update_steps(task: str) -> int:
    return TASK_SPECS[task].default_updates


def derive_goals(task: str, landmarks: np.ndarray, n_agents: int) -> np.ndarray:
    """Goals implied by landmarks for formation/line tasks."""
    if task == "formation":
        center = landmarks[0]
        angles = 2.0 * np.pi * np.arange(n_agents) / n_agents
        return center + FORMATION_CIRCLE_RADIUS * np.stack(
            [np.cos(angles), np.sin(angles)], axis=1
        )
    if task == "line":
        a, b = landmarks[0], landmarks[1]
        if n_agents == 1:
            return ((a + b) / 2.0)[None, :]
        frac = np.linspace(0.0, 1.0, n_agents)[:, None]
        return a[None, :] * (1.0 - frac) + b[None, :] * frac
    raise ValueError(f"task {task!r} has no derived goals")
