"""Cost-vs-safety scatter from eval reports: safety rate on the y axis,
cumulative cost on the x axis, one standard deviation error bars; better
algorithms sit toward the top-left corner."""

from __future__ import annotations

import argparse

import matplotlib.pyplot as plt

from .io import load_reports
from .style import color_for, pinned, save_figure


@pinned
def plot_scatter(report_paths, out_path):
    reports = load_reports(report_paths)
    fig, ax = plt.subplots(figsize=(4.6, 3.6))
    seen: list[str] = []
    labeled: set[str] = set()
    for rep in reports:
        algo = rep["algo"]
        if algo not in seen:
            seen.append(algo)
        ax.errorbar(
            rep["mean_cost"],
            rep["mean_safety_rate"],
            xerr=rep["std_cost"],
            yerr=rep["std_safety_rate"],
            fmt="o",
            color=color_for(algo, seen.index(algo)),
            capsize=3,
            label=None if algo in labeled else algo,
        )
        labeled.add(algo)
    ax.set_xlabel("cost")
    ax.set_ylabel("safety rate")
    ax.legend(loc="lower left")
    fig.tight_layout()
    save_figure(fig, out_path)
    return fig


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        description="Scatter safety rate against cost from eval report JSONs."
    )
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="eval report JSON files")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    plot_scatter(args.inputs, args.out)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
