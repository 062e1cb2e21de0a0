"""Run drivers behind the command-line interface.

``train_run`` executes one (config, seed) training run: per-update rollout
collection and gradient step, a metrics CSV row per update, periodic
checkpoints, and a tagged final checkpoint.  Runs resume from the latest
checkpoint (parameters, optimizer moments, multiplier, and the generator
state all round-trip), and a rerun with the same config and seed produces a
byte-identical final checkpoint.

``eval_run`` loads a checkpoint, validates its metadata against the
requested evaluation, rolls out deterministic episodes (with per-step
distributed budget solves for the epigraph algorithm), and returns a report.

Metrics CSV schema (one row per update)::

    algo,seed,step,policy_loss,vl_loss,vh_loss,entropy,mean_cost,
    safety_rate,lambda,wallclock
"""

from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import RunConfig
from .env.layout import episode_layout, save_layout
from .env.metrics import write_trajectory_csv
from .env.tasks import make_params
from .execution import ZSolverConfig, execute
from .models import NetConfig, ValueHeads, heads_from_params, init_heads, net_config_for_task
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .rollout import ZRange, collect, default_zrange
from .training import AdamState, Trainer

METRICS_COLUMNS = [
    "algo",
    "seed",
    "step",
    "policy_loss",
    "vl_loss",
    "vh_loss",
    "entropy",
    "mean_cost",
    "safety_rate",
    "lambda",
    "wallclock",
]


def _metrics_row(cfg: RunConfig, seed: int, step: int, m: dict) -> list:
    lam = m.get("lambda", float("nan"))
    return [
        cfg.algo,
        seed,
        step,
        repr(float(m["policy_loss"])),
        repr(float(m["vl_loss"])),
        repr(float(m["vh_loss"])),
        repr(float(m["entropy"])),
        repr(float(m["mean_cost"])),
        repr(float(m["safety_rate"])),
        "" if np.isnan(lam) else repr(float(lam)),
        f"{m['wallclock']:.3f}",
    ]


def _checkpoint_meta(cfg: RunConfig, seed: int, zrange: ZRange, net_cfg: NetConfig,
                     update_index: int, tag: str, trainer: Trainer,
                     rng_state: dict) -> dict:
    return {
        "tag": tag,
        "algo": cfg.algo,
        "task": cfg.task,
        "n_agents": cfg.n_agents,
        "horizon": cfg.horizon,
        "nu": 0.5,
        "xi": cfg.xi,
        "z_min": zrange.z_min,
        "z_max": zrange.z_max,
        "seed": seed,
        "update_index": update_index,
        "lambda": trainer.lam,
        "net_config": asdict(net_cfg),
        "rng_state": rng_state,
    }


def _adam_extras(trainer: Trainer) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for head, state in trainer.opt.items():
        out[f"adam_t/{head}"] = np.array([state.t], dtype=np.int64)
        for name, arr in state.m.items():
            out[f"adam_m/{head}/{name}"] = arr
        for name, arr in state.v.items():
            out[f"adam_v/{head}/{name}"] = arr
    return out


def _restore_adam(trainer: Trainer, extra: dict[str, np.ndarray]) -> None:
    for head, state in trainer.opt.items():
        key = f"adam_t/{head}"
        if key in extra:
            state.t = int(extra[key][0])
        for name, arr in extra.items():
            if name.startswith(f"adam_m/{head}/"):
                state.m[name[len(f"adam_m/{head}/"):]] = arr.copy()
            elif name.startswith(f"adam_v/{head}/"):
                state.v[name[len(f"adam_v/{head}/"):]] = arr.copy()


def save_run_checkpoint(path, cfg: RunConfig, seed: int, zrange: ZRange,
                        trainer: Trainer, master: np.random.Generator,
                        update_index: int, tag: str) -> None:
    meta = _checkpoint_meta(
        cfg, seed, zrange, trainer.heads.net_config, update_index, tag, trainer,
        master.bit_generator.state,
    )
    save_checkpoint(path, trainer.heads.all_params(), meta, _adam_extras(trainer))


def load_run_heads(path) -> tuple[ValueHeads, dict, dict]:
    params, meta, extra = load_checkpoint(path)
    net_cfg = NetConfig(**meta["net_config"])
    return heads_from_params(params, net_cfg), meta, extra


def train_run(cfg: RunConfig, seed: int, out_dir, resume: bool = False,
              log=lambda s: None) -> Path:
    """Train one seed; returns the final checkpoint path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = make_params(cfg.task, cfg.n_agents, horizon=cfg.horizon)
    zrange = default_zrange(params)
    updates = cfg.resolved_updates()
    metrics_path = out_dir / "metrics.csv"
    final_path = out_dir / "checkpoint_final.ckpt"
    latest = out_dir / "checkpoint_latest.ckpt"

    start = 0
    if resume and latest.exists():
        heads, meta, extra = load_run_heads(latest)
        trainer = Trainer(heads, cfg.train_config(), cfg.baseline_config(), algo=cfg.algo)
        trainer.lam = float(meta["lambda"])
        _restore_adam(trainer, extra)
        master = np.random.default_rng(seed)
        master.bit_generator.state = meta["rng_state"]
        start = int(meta["update_index"])
        log(f"resuming from update {start}")
    else:
        master = np.random.default_rng(seed)
        heads = init_heads(master, net_config_for_task(cfg.task))
        trainer = Trainer(heads, cfg.train_config(), cfg.baseline_config(), algo=cfg.algo)
        metrics_path.unlink(missing_ok=True)

    new_file = not metrics_path.exists()
    with open(metrics_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(METRICS_COLUMNS)
        for u in range(start, updates):
            collect_seed = int(master.integers(2**62))
            batch = collect(
                heads, params, zrange, cfg.n_envs, collect_seed,
                freeze_z=not trainer.uses_budget,
            )
            m = trainer.update(batch)
            writer.writerow(_metrics_row(cfg, seed, u, m))
            if (u + 1) % cfg.checkpoint_every == 0 and u + 1 < updates:
                save_run_checkpoint(latest, cfg, seed, zrange, trainer, master, u + 1, "periodic")
                log(
                    f"update {u + 1}/{updates} cost {m['mean_cost']:.4f} "
                    f"safety {m['safety_rate']:.3f}"
                )
    save_run_checkpoint(latest, cfg, seed, zrange, trainer, master, updates, "periodic")
    save_run_checkpoint(final_path, cfg, seed, zrange, trainer, master, updates, "final")
    return final_path


def _compat_check(meta: dict, task: str | None, n_agents: int | None) -> list[str]:
    """Warnings for allowed divergences; raises on incompatible ones."""
    problems = []
    warnings_out = []
    if task is not None and task != meta["task"]:
        problems.append(f"task: checkpoint={meta['task']!r} requested={task!r}")
    if n_agents is not None and n_agents != meta["n_agents"]:
        if n_agents > meta["n_agents"]:
            warnings_out.append(
                f"evaluating with N={n_agents} agents a policy trained with "
                f"N={meta['n_agents']} (generalization mode)"
            )
        else:
            warnings_out.append(
                f"evaluating with fewer agents (N={n_agents}) than trained "
                f"(N={meta['n_agents']})"
            )
    if problems:
        raise ValueError(
            "checkpoint metadata does not match the requested evaluation:\n  "
            + "\n  ".join(problems)
        )
    return warnings_out


def eval_run(checkpoint_path, n_episodes: int = 32, seed: int = 0,
             xi: float | None = None, communicate_z: bool | None = None,
             task: str | None = None, n_agents: int | None = None,
             horizon: int | None = None, dump_dir=None) -> dict:
    """Evaluate a checkpoint on fresh episodes; returns the report dict.

    ``xi`` and ``communicate_z`` override the recorded settings (recorded in
    the report).  Task mismatches are refused; a different agent count is
    allowed with a warning (graph networks are size-agnostic).
    """
    heads, meta, _ = load_run_heads(checkpoint_path)
    for w in _compat_check(meta, task, n_agents):
        warnings.warn(w, stacklevel=2)
    n_agents = n_agents if n_agents is not None else int(meta["n_agents"])
    horizon = horizon if horizon is not None else int(meta["horizon"])
    params = make_params(meta["task"], n_agents, horizon=horizon)
    xi_used = meta["xi"] if xi is None else float(xi)
    comm = bool(meta.get("communicate_z", False)) if communicate_z is None else communicate_z
    solver = ZSolverConfig(
        z_min=float(meta["z_min"]),
        z_max=float(meta["z_max"]),
        xi=xi_used,
        nu=float(meta["nu"]),
        communicate_z=comm,
    )
    fixed_z = None if meta["algo"] == "def-marl" else 0.0
    result = execute(heads, params, solver, seed=seed, n_episodes=n_episodes, fixed_z=fixed_z)

    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        # trajectory log plus the episode layout so plots can reproduce
        # obstacles and goals
        for b, traj in enumerate(result.trajectories):
            write_trajectory_csv(traj, dump_dir / f"episode_{b:03d}.csv")
            save_layout(
                episode_layout(result.initial_states[b], params),
                dump_dir / f"episode_{b:03d}.layout",
            )

    report = {
        "schema_version": 1,
        "algo": meta["algo"],
        "task": meta["task"],
        "n_agents": n_agents,
        "horizon": horizon,
        "checkpoint_seed": meta["seed"],
        "eval_seed": seed,
        "n_episodes": n_episodes,
        "xi": xi_used,
        "xi_overridden": xi is not None,
        "communicate_z": comm,
        "mean_cost": float(result.costs.mean()),
        "std_cost": float(result.costs.std()),
        "mean_safety_rate": float(result.safety_rates.mean()),
        "std_safety_rate": float(result.safety_rates.std()),
        "episodes": [
            {"cost": float(c), "safety_rate": float(s)}
            for c, s in zip(result.costs, result.safety_rates)
        ],
        "z_traces": [traj.z.tolist() for traj in result.trajectories],
        "solver": {
            "evals_per_step": result.solver_evals_per_step,
            "feasible_fraction": result.feasible_fraction,
        },
    }
    return report


def write_report(report: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2))


def export_metrics(csv_paths, out_path) -> int:
    """Concatenate metrics CSVs (validating headers); returns the row count."""
    rows = []
    for p in csv_paths:
        with open(p, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != METRICS_COLUMNS:
                raise ValueError(f"{p} does not have the metrics CSV schema")
            rows.extend(reader)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)
        writer.writerows(rows)
    return len(rows)
