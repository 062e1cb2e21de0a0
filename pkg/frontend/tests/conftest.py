"""Deterministic fixture inputs for the plotting tests.

The fixture files mimic the documented schemas exactly (metrics CSV, eval
report JSON, trajectory CSV, layout file) with fixed synthetic contents, so
golden images are reproducible from the repository alone.
"""

import csv
import json
import math
from pathlib import Path

import pytest

GOLDEN_DIR = Path(__file__).parent / "data"

METRICS_COLUMNS = [
    "algo", "seed", "step", "policy_loss", "vl_loss", "vh_loss", "entropy",
    "mean_cost", "safety_rate", "lambda", "wallclock",
]


def synth_metrics_rows(algo: str, seed: int, n: int = 40):
    rows = []
    for step in range(n):
        t = step / (n - 1)
        base = 0.6 - 0.35 * t if algo == "def-marl" else 0.62 - 0.18 * t
        wobble = 0.02 * math.sin(7.0 * t + seed)
        cost = round(base + wobble + 0.01 * seed, 6)
        safety = round(min(1.0, 0.82 + 0.15 * t + 0.01 * math.cos(5 * t + seed)), 6)
        rows.append(
            [algo, seed, step, -0.01, 0.002, 0.003, 1.8, cost, safety, "", f"{step * 1.3:.3f}"]
        )
    return rows


@pytest.fixture(scope="session")
def metrics_csvs(tmp_path_factory):
    root = tmp_path_factory.mktemp("metrics")
    paths = []
    for algo in ("def-marl", "penalty"):
        for seed in (0, 1, 2):
            p = root / f"{algo}_{seed}.csv"
            with open(p, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(METRICS_COLUMNS)
                writer.writerows(synth_metrics_rows(algo, seed))
            paths.append(p)
    return paths


@pytest.fixture(scope="session")
def report_jsons(tmp_path_factory):
    root = tmp_path_factory.mktemp("reports")
    specs = [
        ("def-marl", 0.21, 0.05, 0.97, 0.03),
        ("def-marl", 0.24, 0.06, 0.99, 0.01),
        ("penalty", 0.35, 0.08, 0.98, 0.02),
        ("lagr", 0.19, 0.07, 0.81, 0.09),
    ]
    paths = []
    for i, (algo, mc, sc, ms, ss) in enumerate(specs):
        p = root / f"report_{i}.json"
        p.write_text(
            json.dumps(
                {
                    "algo": algo,
                    "mean_cost": mc,
                    "std_cost": sc,
                    "mean_safety_rate": ms,
                    "std_safety_rate": ss,
                }
            )
        )
        paths.append(p)
    return paths


@pytest.fixture(scope="session")
def trajectory_files(tmp_path_factory):
    root = tmp_path_factory.mktemp("traj")
    n_agents, K = 2, 30
    header = (
        ["k"]
        + [f"{c}{i}" for i in range(n_agents) for c in ("px", "py", "vx", "vy")]
        + ["z"]
        + [f"{c}{i}" for i in range(n_agents) for c in ("ux", "uy")]
        + ["l"]
        + [f"h{i + 1}" for i in range(n_agents)]
    )
    csv_path = root / "episode.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(K):
            t = k / (K - 1)
            p0 = (-0.5 + 0.9 * t, -0.3 + 0.5 * t)
            p1 = (0.5 - 0.8 * t, 0.4 - 0.7 * t)
            h0 = 0.54 if 12 <= k <= 14 else -0.6  # a short unsafe stretch
            h1 = -0.7
            row = (
                [k]
                + [p0[0], p0[1], 0.1, 0.1, p1[0], p1[1], -0.1, -0.1]
                + [0.8 - 0.01 * k]
                + [0.1, 0.0, -0.1, 0.0]
                + [0.005]
                + [h0, h1]
            )
            writer.writerow(row)
    layout_path = root / "episode.layout"
    layout_path.write_text(
        "schema_version = 1\n"
        "kind = episode\n"
        "arena_side = 1.5\n"
        "obstacle = 0.1 0.12 0.05\n"
        "obstacle = -0.3 -0.2 0.05\n"
        "goal = 0.4 0.2\n"
        "goal = -0.3 -0.3\n"
        "agent = -0.5 -0.3\n"
        "agent = 0.5 0.4\n"
    )
    return csv_path, layout_path
