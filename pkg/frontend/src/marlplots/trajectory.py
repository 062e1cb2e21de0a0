"""Top-down episode snapshot: arena, obstacles, goals, agent paths, and
markers on every step where an agent's safety margin is positive."""

from __future__ import annotations

import argparse

import numpy as np
import matplotlib.pyplot as plt
from matplotlib.patches import Circle, Rectangle

from .io import load_layout, load_trajectory
from .style import FALLBACK_COLORS, pinned, save_figure

AGENT_COLORS = ["#2066a8", "#4c9f70", "#d1605e", "#b07aa1", "#b0913f", "#5b5b8f"]


@pinned
def plot_trajectory(traj_csv, layout_file, out_path):
    traj = load_trajectory(traj_csv)
    layout = load_layout(layout_file)
    fig, ax = plt.subplots(figsize=(4.4, 4.4))
    half = layout.arena_side / 2.0
    ax.add_patch(
        Rectangle((-half, -half), layout.arena_side, layout.arena_side,
                  fill=False, edgecolor="#444444", linewidth=1.0)
    )
    for x, y, r in layout.obstacles:
        ax.add_patch(Circle((x, y), r, facecolor="#c0c0c0", edgecolor="#808080"))
    for x, y in layout.goals:
        ax.plot(x, y, marker="*", markersize=11, color="#caa12d", linestyle="none")
    for x, y in layout.landmarks:
        ax.plot(x, y, marker="s", markersize=6, color="#666666", linestyle="none")

    pos = np.asarray(traj.positions)  # (K, N, 2)
    margins = np.asarray(traj.margins)  # (K, N)
    for i in range(traj.n_agents):
        color = AGENT_COLORS[i % len(AGENT_COLORS)]
        ax.plot(pos[:, i, 0], pos[:, i, 1], color=color, label=f"agent {i}")
        ax.plot(pos[0, i, 0], pos[0, i, 1], marker="o", color=color)
        unsafe = margins[:, i] > 0.0
        if unsafe.any():
            ax.plot(pos[unsafe, i, 0], pos[unsafe, i, 1], linestyle="none",
                    marker="x", markersize=7, color="#cc0000", zorder=5)
    ax.set_aspect("equal")
    lim = half * 1.15
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    save_figure(fig, out_path)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Draw one logged episode over its layout file."
    )
    parser.add_argument("--in", dest="traj", required=True, help="trajectory CSV")
    parser.add_argument("--layout", required=True, help="episode layout file")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    plot_trajectory(args.traj, args.layout, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
