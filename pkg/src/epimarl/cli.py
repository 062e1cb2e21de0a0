"""Command-line interface.

Subcommands::

    epimarl train  --config run.cfg [--task ... --algo ... --seed ... --out ...]
    epimarl eval   --checkpoint ckpt [--n-episodes 32 --xi 0.4 --communicate-z ...]
    epimarl verify [--instances 100 --out report.json]
    epimarl export-metrics --out merged.csv metrics1.csv metrics2.csv ...

Flags override config-file values.  Every training run writes its resolved
config, a metrics CSV (one row per update), periodic checkpoints, and a
final tagged checkpoint into the output directory (one subdirectory per
seed when several are configured).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, RunConfig, load_config, save_config, validate_config
from .runner import eval_run, export_metrics, train_run, write_report


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    simple = (
        "task", "algo", "n_agents", "updates", "n_envs", "horizon", "out",
        "beta", "lambda0", "lambda_lr", "xi", "n_episodes", "checkpoint_every",
    )
    for name in simple:
        v = getattr(args, name.replace("-", "_"), None)
        if v is not None:
            cfg = replace(cfg, **{name: v})
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seeds=[args.seed])
    if getattr(args, "communicate_z", None) is not None:
        cfg = replace(cfg, communicate_z=args.communicate_z)
    return validate_config(cfg)


def _add_common_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="run config file")
    p.add_argument("--task", help="task tag")
    p.add_argument("--algo", help="def-marl | penalty | lagr | lagr-mot")
    p.add_argument("--seed", type=int, help="single seed (overrides the config list)")
    p.add_argument("--n-agents", type=int, dest="n_agents")
    p.add_argument("--updates", type=int)
    p.add_argument("--n-envs", type=int, dest="n_envs")
    p.add_argument("--horizon", type=int)
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every")
    p.add_argument("--out", help="output directory")
    p.add_argument("--beta", type=float)
    p.add_argument("--lambda0", type=float)
    p.add_argument("--lambda-lr", type=float, dest="lambda_lr")
    p.add_argument("--xi", type=float)
    p.add_argument(
        "--communicate-z", action="store_true", default=None, dest="communicate_z"
    )


def cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg = _apply_overrides(cfg, args)
    out_root = Path(cfg.out)
    final_paths = []
    for seed in cfg.seeds:
        out_dir = out_root / f"seed{seed}" if len(cfg.seeds) > 1 else out_root
        out_dir.mkdir(parents=True, exist_ok=True)
        save_config(replace(cfg, seeds=[seed], out=str(out_dir)), out_dir / "resolved.cfg")
        final = train_run(
            cfg, seed, out_dir, resume=args.resume,
            log=lambda s, _seed=seed: print(f"[seed {_seed}] {s}"),
        )
        final_paths.append(final)
        print(f"[seed {seed}] final checkpoint: {final}")
    return 0


def cmd_eval(args) -> int:
    report = eval_run(
        args.checkpoint,
        n_episodes=args.n_episodes,
        seed=args.seed,
        xi=args.xi,
        communicate_z=args.communicate_z,
        task=args.task,
        n_agents=args.n_agents,
        horizon=args.horizon,
        dump_dir=args.dump_trajectories,
    )
    out = args.out or (Path(args.checkpoint).parent / "eval_report.json")
    write_report(report, out)
    print(
        f"cost {report['mean_cost']:.4f} +/- {report['std_cost']:.4f}  "
        f"safety {report['mean_safety_rate']:.4f} +/- {report['std_safety_rate']:.4f}  "
        f"({report['n_episodes']} episodes, xi={report['xi']}, "
        f"communicate_z={report['communicate_z']})"
    )
    print(f"report: {out}")
    return 0


def cmd_verify(args) -> int:
    import numpy as np

    from .env.tasks import make_params
    from .models import init_heads, net_config_for_task
    from .oracle import run_verification, write_report as write_oracle_report
    from .rollout import budget_recursion_gap, collect, default_zrange, telescoping_gap

    report = run_verification(n_instances=args.instances, seed0=args.seed)
    print(
        f"tabular: {report.passed} passed, {report.failed} failed, "
        f"{report.infeasible_regenerated} infeasible regenerated, "
        f"{report.premise_regenerated} premise-rejected regenerated"
    )
    ok = report.ok

    # value-recursion and telescoping identities on continuous rollouts
    params = make_params("target", 3, horizon=128)
    heads = init_heads(np.random.default_rng(args.seed), net_config_for_task("target"))
    batch = collect(heads, params, default_zrange(params), n_envs=args.rollouts,
                    seed=args.seed)
    gap_v = budget_recursion_gap(batch.costs, batch.margins, batch.z)
    gap_z = telescoping_gap(batch)
    print(f"rollout recursion identity gap: {gap_v:.3e} (tolerance 1e-9)")
    print(f"rollout budget telescoping gap: {gap_z:.3e} (tolerance 1e-9)")
    ok = ok and gap_v <= 1e-9 and gap_z <= 1e-9

    if args.out:
        write_oracle_report(report, args.out)
        print(f"report: {args.out}")
    print("verification PASSED" if ok else "verification FAILED")
    return 0 if ok else 1


def cmd_export_metrics(args) -> int:
    n = export_metrics(args.csvs, args.out)
    print(f"wrote {n} rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epimarl",
        description="Epigraph-form safe multi-agent RL: training, evaluation, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one run per configured seed")
    _add_common_train_flags(p_train)
    p_train.add_argument("--resume", action="store_true", help="continue from the latest checkpoint")
    p_train.set_defaults(fn=cmd_train)

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on fresh episodes")
    p_eval.add_argument("--checkpoint", required=True, type=Path)
    p_eval.add_argument("--n-episodes", type=int, default=32, dest="n_episodes")
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--xi", type=float, default=None)
    p_eval.add_argument("--communicate-z", action="store_true", default=None,
                        dest="communicate_z")
    p_eval.add_argument("--task", default=None)
    p_eval.add_argument("--n-agents", type=int, default=None, dest="n_agents")
    p_eval.add_argument("--horizon", type=int, default=None)
    p_eval.add_argument("--out", type=Path, default=None)
    p_eval.add_argument("--dump-trajectories", type=Path, default=None,
                        dest="dump_trajectories")
    p_eval.set_defaults(fn=cmd_eval)

    p_verify = sub.add_parser("verify", help="run the exhaustive verification oracles")
    p_verify.add_argument("--instances", type=int, default=100)
    p_verify.add_argument("--rollouts", type=int, default=100)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out", type=Path, default=None)
    p_verify.set_defaults(fn=cmd_verify)

    p_export = sub.add_parser("export-metrics", help="merge metrics CSVs")
    p_export.add_argument("csvs", nargs="+", type=Path)
    p_export.add_argument("--out", required=True, type=Path)
    p_export.set_defaults(fn=cmd_export_metrics)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
