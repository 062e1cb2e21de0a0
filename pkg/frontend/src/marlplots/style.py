"""Pinned plotting style so identical inputs render identical images."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

PINNED_RCPARAMS = {
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "font.family": "DejaVu Sans",
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.6,
    "legend.frameon": False,
    "svg.hashsalt": "marlplots",
}

# stable algorithm order and colors across all figures
PALETTE = {
    "def-marl": "#2066a8",
    "penalty": "#d1605e",
    "lagr": "#4c9f70",
    "lagr-mot": "#b07aa1",
}
FALLBACK_COLORS = ["#777777", "#a87932", "#32a8a0", "#a83273"]


def color_for(algo: str, index: int) -> str:
    return PALETTE.get(algo, FALLBACK_COLORS[index % len(FALLBACK_COLORS)])


def pinned(func):
    """Run a plotting function under the pinned rcParams."""

    def wrapper(*args, **kwargs):
        with plt.rc_context(PINNED_RCPARAMS):
            return func(*args, **kwargs)

    wrapper.__name__ = func.__name__
    wrapper.__doc__ = func.__doc__
    return wrapper


def save_figure(fig, out_path) -> None:
    """Write the figure without volatile metadata (byte-stable output)."""
    out = str(out_path)
    if out.endswith(".png"):
        fig.savefig(out, metadata={"Software": None})
    elif out.endswith(".svg"):
        fig.savefig(out, metadata={"Date": None, "Creator": None})
    else:
        fig.savefig(out)
