"""Readers for the documented file formats.

This package talks to the training stack only through files: the metrics
CSV (one row per update), the eval report JSON, the trajectory CSV (one row
per step), and the key-value layout files.  Schemas are validated here and
violations raise ``SchemaError`` naming what is missing.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path


class SchemaError(ValueError):
    pass


METRICS_REQUIRED = ("algo", "seed", "step", "mean_cost", "safety_rate")


@dataclass
class MetricsFrame:
    """Metrics rows keyed by (algo, seed) in step order."""

    series: dict = field(default_factory=dict)  # (algo, seed) -> list of row dicts

    @property
    def algos(self) -> list[str]:
        seen = []
        for algo, _ in self.series:
            if algo not in seen:
                seen.append(algo)
        return seen

    def seeds_of(self, algo: str) -> list[int]:
        return sorted(seed for a, seed in self.series if a == algo)


def load_metrics(paths) -> MetricsFrame:
    frame = MetricsFrame()
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = [c for c in METRICS_REQUIRED if c not in (reader.fieldnames or [])]
            if missing:
                raise SchemaError(f"{path}: missing metrics columns {missing}")
            for row in reader:
                key = (row["algo"], int(row["seed"]))
                frame.series.setdefault(key, []).append(
                    {
                        "step": int(row["step"]),
                        "mean_cost": float(row["mean_cost"]),
                        "safety_rate": float(row["safety_rate"]),
                    }
                )
    for (algo, seed), rows in frame.series.items():
        steps = [r["step"] for r in rows]
        if any(b <= a for a, b in zip(steps, steps[1:])):
            raise SchemaError(f"steps not strictly increasing for ({algo}, seed {seed})")
    return frame


REPORT_REQUIRED = ("algo", "mean_cost", "std_cost", "mean_safety_rate", "std_safety_rate")


def load_reports(paths) -> list[dict]:
    reports = []
    for path in paths:
        data = json.loads(Path(path).read_text())
        missing = [k for k in REPORT_REQUIRED if k not in data]
        if missing:
            raise SchemaError(f"{path}: missing report fields {missing}")
        reports.append(data)
    return reports


@dataclass
class TrajectoryTable:
    steps: list
    positions: list  # per step: list of (x, y) per agent
    margins: list  # per step: list of h per agent
    n_agents: int


def load_trajectory(path) -> TrajectoryTable:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        n_agents = sum(1 for c in cols if c.startswith("px"))
        needed = (
            ["k", "l"]
            + [f"p{ax}{i}" for i in range(n_agents) for ax in "xy"]
            + [f"h{i + 1}" for i in range(n_agents)]
        )
        missing = [c for c in needed if c not in cols]
        if missing or n_agents == 0:
            raise SchemaError(f"{path}: missing trajectory columns {missing or ['px*']}")
        steps, positions, margins = [], [], []
        for row in reader:
            steps.append(int(row["k"]))
            positions.append(
                [(float(row[f"px{i}"]), float(row[f"py{i}"])) for i in range(n_agents)]
            )
            margins.append([float(row[f"h{i + 1}"]) for i in range(n_agents)])
    return TrajectoryTable(steps, positions, margins, n_agents)


@dataclass
class LayoutTable:
    arena_side: float = 1.0
    obstacles: list = field(default_factory=list)  # (x, y, r)
    goals: list = field(default_factory=list)
    landmarks: list = field(default_factory=list)
    agents: list = field(default_factory=list)


def load_layout(path) -> LayoutTable:
    table = LayoutTable()
    saw_version = False
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaError(f"{path} line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        parts = value.split()
        if key == "schema_version":
            saw_version = True
        elif key == "arena_side":
            table.arena_side = float(parts[0])
        elif key == "obstacle":
            table.obstacles.append(tuple(float(p) for p in parts))
        elif key in ("goal", "landmark", "agent"):
            getattr(table, key + "s").append((float(parts[0]), float(parts[1])))
        elif key in ("kind", "region"):
            pass
        else:
            raise SchemaError(f"{path} line {lineno}: unknown key {key!r}")
    if not saw_version:
        raise SchemaError(f"{path}: missing schema_version")
    return table
