from .io import (
    LayoutTable,
    MetricsFrame,
    SchemaError,
    TrajectoryTable,
    load_layout,
    load_metrics,
    load_reports,
    load_trajectory,
)
from .scatter import plot_scatter
from .training_curves import plot_training
from .trajectory import plot_trajectory

__all__ = [
    "LayoutTable",
    "MetricsFrame",
    "SchemaError",
    "TrajectoryTable",
    "load_layout",
    "load_metrics",
    "load_reports",
    "load_trajectory",
    "plot_scatter",
    "plot_training",
    "plot_trajectory",
]
