"""Operator surface: config parsing, training runs with metrics/checkpoints,
rerun determinism, resume, evaluation reports, verification, and metrics
export."""

import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from epimarl.cli import main
from epimarl.config import ConfigError, RunConfig, format_config, parse_config
from epimarl.nn.checkpoint import checkpoint_digest
from epimarl.runner import METRICS_COLUMNS, eval_run, train_run

FAST = dict(task="target", n_agents=2, horizon=12, n_envs=4, updates=4, checkpoint_every=2)


def fast_config(**over):
    kw = dict(FAST)
    kw.update(over)
    return RunConfig(**kw)


# ---------------------------------------------------------------------------
# config format


def test_config_roundtrip():
    cfg = fast_config(algo="penalty", beta=0.1, seeds=[3, 4])
    back = parse_config(format_config(cfg))
    assert back == cfg


def test_config_unknown_task_names_field():
    with pytest.raises(ConfigError, match="field 'task'.*'warehouse'"):
        parse_config("schema_version = 1\ntask = warehouse\n")


def test_config_unknown_key_has_line_number():
    with pytest.raises(ConfigError, match="line 3"):
        parse_config("schema_version = 1\ntask = target\nbogus = 1\n")


def test_config_bad_type_names_field():
    with pytest.raises(ConfigError, match="field 'n_envs'"):
        parse_config("schema_version = 1\nn_envs = many\n")


def test_config_requires_schema_version():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config("task = target\n")


def test_config_seed_singular_alias():
    cfg = parse_config("schema_version = 1\nseed = 7\n")
    assert cfg.seeds == [7]


def test_config_rejects_unknown_algo():
    with pytest.raises(ConfigError, match="field 'algo'"):
        parse_config("schema_version = 1\nalgo = sac\n")


# ---------------------------------------------------------------------------
# training runs


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = fast_config()
    final = train_run(cfg, seed=0, out_dir=out)
    return cfg, out, final


def test_train_writes_metrics_row_per_update(trained):
    cfg, out, final = trained
    lines = (out / "metrics.csv").read_text().strip().splitlines()
    assert lines[0] == ",".join(METRICS_COLUMNS)
    assert len(lines) == 1 + cfg.updates
    assert final.exists()


def test_train_rerun_same_seed_identical_checkpoint(trained, tmp_path):
    cfg, out, final = trained
    final2 = train_run(cfg, seed=0, out_dir=tmp_path)
    assert checkpoint_digest(final) == checkpoint_digest(final2)


def test_train_different_seed_differs(trained, tmp_path):
    cfg, out, final = trained
    final2 = train_run(cfg, seed=1, out_dir=tmp_path)
    assert checkpoint_digest(final) != checkpoint_digest(final2)


def test_train_resume_matches_straight_run(trained, tmp_path):
    cfg, out, final = trained
    part = fast_config(updates=2)
    train_run(part, seed=0, out_dir=tmp_path)
    resumed = train_run(fast_config(updates=4), seed=0, out_dir=tmp_path, resume=True)
    assert checkpoint_digest(resumed) == checkpoint_digest(final)
    lines = (tmp_path / "metrics.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 4


def test_train_resume_restores_multiplier_state(tmp_path):
    # the Lagrangian multiplier, optimizer moments, and generator state all
    # round-trip: split training matches the straight run bit for bit
    kw = dict(algo="lagr", lambda0=1.0, lambda_lr=3e-3)
    full = train_run(fast_config(updates=4, **kw), seed=0, out_dir=tmp_path / "full")
    train_run(fast_config(updates=2, **kw), seed=0, out_dir=tmp_path / "split")
    resumed = train_run(fast_config(updates=4, **kw), seed=0,
                        out_dir=tmp_path / "split", resume=True)
    assert checkpoint_digest(resumed) == checkpoint_digest(full)


def test_train_cli_entrypoint(tmp_path):
    rc = main(
        [
            "train", "--task", "target", "--algo", "def-marl", "--n-agents", "2",
            "--horizon", "12", "--n-envs", "4", "--updates", "2", "--seed", "5",
            "--out", str(tmp_path / "cli_run"),
        ]
    )
    assert rc == 0
    assert (tmp_path / "cli_run" / "resolved.cfg").exists()
    assert (tmp_path / "cli_run" / "checkpoint_final.ckpt").exists()


def test_train_cli_bad_task_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("schema_version = 1\ntask = warehouse\n")
    rc = main(["train", "--config", str(bad)])
    assert rc == 2
    assert "task" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# evaluation


def test_eval_report_contents(trained, tmp_path):
    cfg, out, final = trained
    report = eval_run(final, n_episodes=3, seed=1, dump_dir=tmp_path / "dumps")
    assert report["n_episodes"] == 3
    assert report["algo"] == "def-marl"
    assert len(report["episodes"]) == 3
    assert len(report["z_traces"]) == 3
    assert 0.0 <= report["mean_safety_rate"] <= 1.0
    assert not report["xi_overridden"]
    assert (tmp_path / "dumps" / "episode_000.csv").exists()
    assert (tmp_path / "dumps" / "episode_000.layout").exists()


def test_eval_xi_override_recorded(trained):
    cfg, out, final = trained
    report = eval_run(final, n_episodes=2, seed=1, xi=0.0)
    assert report["xi"] == 0.0
    assert report["xi_overridden"]


def test_eval_task_mismatch_refused(trained):
    cfg, out, final = trained
    with pytest.raises(ValueError, match="task"):
        eval_run(final, n_episodes=1, task="spread")


def test_eval_more_agents_warns_but_runs(trained):
    cfg, out, final = trained
    with pytest.warns(UserWarning, match="generalization"):
        report = eval_run(final, n_episodes=2, n_agents=3)
    assert report["n_agents"] == 3


def test_eval_cli_writes_report(trained, tmp_path):
    cfg, out, final = trained
    rc = main(
        [
            "eval", "--checkpoint", str(final), "--n-episodes", "2",
            "--out", str(tmp_path / "report.json"),
        ]
    )
    assert rc == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["n_episodes"] == 2


def test_eval_default_episode_count_is_32():
    from epimarl.cli import build_parser

    args = build_parser().parse_args(["eval", "--checkpoint", "x.ckpt"])
    assert args.n_episodes == 32


# ---------------------------------------------------------------------------
# verify and export


def test_verify_cli_small(tmp_path, capsys):
    rc = main(
        [
            "verify", "--instances", "5", "--rollouts", "3",
            "--out", str(tmp_path / "verify.json"),
        ]
    )
    assert rc == 0
    data = json.loads((tmp_path / "verify.json").read_text())
    assert data["ok"]
    assert data["passed"] >= 5
    out = capsys.readouterr().out
    assert "PASSED" in out


def test_export_metrics(trained, tmp_path):
    cfg, out, final = trained
    merged = tmp_path / "merged.csv"
    rc = main(
        ["export-metrics", str(out / "metrics.csv"), str(out / "metrics.csv"),
         "--out", str(merged)]
    )
    assert rc == 0
    lines = merged.read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * cfg.updates


def test_export_metrics_rejects_foreign_schema(tmp_path):
    bad = tmp_path / "foreign.csv"
    bad.write_text("a,b\n1,2\n")
    rc = main(["export-metrics", str(bad), "--out", str(tmp_path / "m.csv")])
    assert rc == 2


def test_penalty_training_via_runner(tmp_path):
    cfg = fast_config(algo="penalty", beta=0.5, updates=2)
    final = train_run(cfg, seed=0, out_dir=tmp_path)
    report = eval_run(final, n_episodes=2, seed=0)
    assert report["algo"] == "penalty"
    # baselines execute with the budget pinned to zero
    assert np.allclose(np.asarray(report["z_traces"]), 0.0)
