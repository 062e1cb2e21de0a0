"""Versioned key-value layout files.

One statement per line, ``key = value``; ``#`` starts a comment.  Repeated
keys build lists.  Two kinds share the schema:

* task layouts (shipped with the package) fix obstacle coordinates and the
  boxes entities are sampled from;
* episode layouts record the entities a concrete episode was reset with, so
  plots can be reproduced from a trajectory log alone.

Recognized keys::

    schema_version = 1
    kind = task | episode
    arena_side = <float>
    obstacle = <x> <y> <radius>          # repeatable
    region = <name> <xmin> <xmax> <ymin> <ymax>   # repeatable, task kind
    goal = <x> <y>                        # repeatable, episode kind
    landmark = <x> <y>                    # repeatable
    agent = <x> <y>                       # repeatable, episode kind
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LAYOUT_SCHEMA_VERSION = 1


class LayoutError(ValueError):
    pass


@dataclass
class Layout:
    kind: str = "task"
    arena_side: float = 1.0
    obstacles: list[tuple[float, float, float]] = field(default_factory=list)
    regions: dict[str, tuple[float, float, float, float]] = field(default_factory=dict)
    goals: list[tuple[float, float]] = field(default_factory=list)
    landmarks: list[tuple[float, float]] = field(default_factory=list)
    agents: list[tuple[float, float]] = field(default_factory=list)

    def obstacle_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.obstacles:
            return np.zeros((0, 2)), np.zeros((0,))
        arr = np.asarray(self.obstacles, dtype=np.float64)
        return arr[:, :2], arr[:, 2]


def _floats(parts: list[str], n: int, key: str, lineno: int) -> list[float]:
    if len(parts) != n:
        raise LayoutError(f"line {lineno}: '{key}' expects {n} values, got {len(parts)}")
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise LayoutError(f"line {lineno}: bad number in '{key}': {exc}") from None


def parse_layout(text: str) -> Layout:
    layout = Layout()
    saw_version = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise LayoutError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        parts = value.split()
        if key == "schema_version":
            if value != str(LAYOUT_SCHEMA_VERSION):
                raise LayoutError(f"line {lineno}: unsupported schema_version {value!r}")
            saw_version = True
        elif key == "kind":
            if value not in ("task", "episode"):
                raise LayoutError(f"line {lineno}: kind must be 'task' or 'episode'")
            layout.kind = value
        elif key == "arena_side":
            layout.arena_side = _floats(parts, 1, key, lineno)[0]
        elif key == "obstacle":
            x, y, r = _floats(parts, 3, key, lineno)
            if r <= 0:
                raise LayoutError(f"line {lineno}: obstacle radius must be positive")
            layout.obstacles.append((x, y, r))
        elif key == "region":
            if len(parts) != 5:
                raise LayoutError(f"line {lineno}: 'region' expects name + 4 numbers")
            name = parts[0]
            xmin, xmax, ymin, ymax = _floats(parts[1:], 4, key, lineno)
            layout.regions[name] = (xmin, xmax, ymin, ymax)
        elif key in ("goal", "landmark", "agent"):
            x, y = _floats(parts, 2, key, lineno)
            getattr(layout, key + "s").append((x, y))
        else:
            raise LayoutError(f"line {lineno}: unknown key {key!r}")
    if not saw_version:
        raise LayoutError("missing schema_version")
    return layout


def load_layout(path) -> Layout:
    return parse_layout(Path(path).read_text())


def format_layout(layout: Layout) -> str:
    lines = [
        f"schema_version = {LAYOUT_SCHEMA_VERSION}",
        f"kind = {layout.kind}",
        f"arena_side = {layout.arena_side!r}",
    ]
    for x, y, r in layout.obstacles:
        lines.append(f"obstacle = {x!r} {y!r} {r!r}")
    for name, (xmin, xmax, ymin, ymax) in layout.regions.items():
        lines.append(f"region = {name} {xmin!r} {xmax!r} {ymin!r} {ymax!r}")
    for key in ("goal", "landmark", "agent"):
        for x, y in getattr(layout, key + "s"):
            lines.append(f"{key} = {x!r} {y!r}")
    return "\n".join(lines) + "\n"


def save_layout(layout: Layout, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_layout(layout))


def episode_layout(state, params) -> Layout:
    """Snapshot the entities of a reset state as an episode layout."""
    return Layout(
        kind="episode",
        arena_side=params.arena_side,
        obstacles=[
            (float(c[0]), float(c[1]), float(r))
            for c, r in zip(state.obstacle_centers, state.obstacle_radii)
        ],
        goals=[(float(g[0]), float(g[1])) for g in state.goals],
        landmarks=[(float(p[0]), float(p[1])) for p in state.landmarks],
        agents=[(float(p[0]), float(p[1])) for p in state.agent_pos],
    )
