"""Training curves: cost and safety rate against update step, with a
mean line per algorithm and a +/-1 standard deviation band across seeds."""

from __future__ import annotations

import argparse
import warnings

import numpy as np
import matplotlib.pyplot as plt

from .io import load_metrics
from .style import color_for, pinned, save_figure


def _per_algo_series(frame, algo, field):
    seeds = frame.seeds_of(algo)
    series = [frame.series[(algo, s)] for s in seeds]
    n = min(len(rows) for rows in series)
    if any(len(rows) != n for rows in series):
        warnings.warn(f"{algo}: seeds have different lengths; truncating to {n} rows")
    steps = np.array([r["step"] for r in series[0][:n]])
    values = np.stack([[r[field] for r in rows[:n]] for rows in series])
    return steps, values


@pinned
def plot_training(csv_paths, out_path):
    """Two panels (cost, safety rate) with +/-1 std bands across seeds."""
    frame = load_metrics(csv_paths)
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 3.4))
    panels = (("mean_cost", "training cost"), ("safety_rate", "safety rate"))
    for ax, (field, label) in zip(axes, panels):
        for i, algo in enumerate(frame.algos):
            steps, values = _per_algo_series(frame, algo, field)
            mean = values.mean(axis=0)
            color = color_for(algo, i)
            ax.plot(steps, mean, label=algo, color=color)
            if values.shape[0] > 1:
                std = values.std(axis=0)
                ax.fill_between(steps, mean - std, mean + std, color=color, alpha=0.25,
                                linewidth=0)
            else:
                warnings.warn(f"{algo}: single seed, no deviation band")
        ax.set_xlabel("update step")
        ax.set_ylabel(label)
    axes[0].legend()
    fig.tight_layout()
    save_figure(fig, out_path)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Plot training curves from metrics CSVs.")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="metrics CSV files (one per run)")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    plot_training(args.inputs, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
