"""Epigraph-form safe multi-agent reinforcement learning.

A constrained team-control problem (minimize cumulative team cost, never
violate per-agent safety margins) is restated with an auxiliary cost budget
z: an unconstrained inner policy problem conditioned on z, trained
centrally, and a one-dimensional outer problem over z that each agent solves
locally at execution time with its constraint critic and a bracketing root
finder.  Includes penalty and Lagrangian baseline trainers, six particle
tasks, a from-scratch reverse-mode autodiff engine with a graph-attention
backbone, and exhaustive tabular oracles for the theory.
"""

from . import config, execution, models, nn, oracle, rollout, rootfind, runner, training
from . import env

__version__ = "0.1.0"

__all__ = [
    "config",
    "env",
    "execution",
    "models",
    "nn",
    "oracle",
    "rollout",
    "rootfind",
    "runner",
    "training",
    "__version__",
]
