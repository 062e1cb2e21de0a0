"""Secondary acceptance: figures from the real desk-scale benchmark outputs.

Golden-file comparisons run on the deterministic fixtures in test_plots.py;
this module exercises the same entry points on the primary package's actual
smoke-benchmark artifacts (runs/smoke), checking they render without error
with the documented axis orientation and deviation bands.
"""

from pathlib import Path

import pytest

from marlplots import plot_scatter, plot_training

SMOKE_ROOT = Path(__file__).resolve().parents[2] / "runs" / "smoke"


@pytest.fixture(scope="module")
def smoke_outputs():
    metrics = sorted(SMOKE_ROOT.glob("*/metrics.csv"))
    reports = sorted(SMOKE_ROOT.glob("*/eval_report.json"))
    if len(metrics) < 2 or len(reports) < 2:
        pytest.skip(
            "smoke-benchmark outputs not present; run the primary acceptance "
            "suite first (pytest ../tests/test_acceptance.py)"
        )
    return metrics, reports


def test_training_curves_from_smoke_outputs(smoke_outputs, tmp_path):
    metrics, _ = smoke_outputs
    out = tmp_path / "smoke_training.png"
    fig = plot_training(metrics, out)
    axes = fig.get_axes()
    assert out.stat().st_size > 0
    assert axes[0].get_ylabel() == "training cost"
    assert axes[1].get_ylabel() == "safety rate"
    # three seeds per algorithm produce deviation bands
    assert len(axes[0].collections) >= 1
    print(f"ACCEPTANCE secondary training curves: PASS ({out.name} rendered)")


def test_scatter_from_smoke_outputs(smoke_outputs, tmp_path):
    _, reports = smoke_outputs
    out = tmp_path / "smoke_scatter.png"
    fig = plot_scatter(reports, out)
    ax = fig.get_axes()[0]
    assert out.stat().st_size > 0
    assert ax.get_xlabel() == "cost"
    assert ax.get_ylabel() == "safety rate"
    print(f"ACCEPTANCE secondary scatter: PASS ({out.name} rendered)")
