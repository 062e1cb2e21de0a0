"""Run configuration: a versioned key-value text format plus defaults.

One ``key = value`` statement per line, ``#`` comments, same dialect as the
layout files.  Parse errors carry line numbers and the offending field.
Command-line flags override file values; every run writes its resolved
configuration next to its outputs so reruns are reproducible from
(config, seed) alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .env.tasks import TASK_SPECS, default_update_steps
from .training import BaselineConfig, TrainConfig

CONFIG_SCHEMA_VERSION = 1

ALGOS = ("def-marl", "penalty", "lagr", "lagr-mot")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    task: str = "target"
    n_agents: int = 3
    algo: str = "def-marl"
    seeds: list[int] = field(default_factory=lambda: [0])
    updates: int | None = None  # None: the task's published default
    n_envs: int = 128
    horizon: int = 128
    checkpoint_every: int = 100
    out: str = "runs/run"
    # baseline knobs
    beta: float = 0.5
    lambda0: float = 1.0
    lambda_lr: float = 1e-7
    # execution knobs
    xi: float = 0.4
    communicate_z: bool = False
    n_episodes: int = 32
    # optimization knobs (shared hyperparameters)
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.25
    ppo_epochs: int = 1
    entropy_coef: float = 0.01
    policy_lr: float = 3e-4
    vl_lr: float = 1e-3
    vh_lr: float = 1e-3
    grad_clip_norm: float = 2.0

    def resolved_updates(self) -> int:
        return self.updates if self.updates is not None else default_update_steps(self.task)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            gamma=self.gamma,
            gae_lambda=self.gae_lambda,
            clip_eps=self.clip_eps,
            ppo_epochs=self.ppo_epochs,
            entropy_coef=self.entropy_coef,
            policy_lr=self.policy_lr,
            vl_lr=self.vl_lr,
            vh_lr=self.vh_lr,
            grad_clip_norm=self.grad_clip_norm,
        )

    def baseline_config(self) -> BaselineConfig | None:
        if self.algo == "def-marl":
            return None
        return BaselineConfig(
            mode=self.algo,
            beta=self.beta,
            lambda0=self.lambda0,
            lambda_lr=self.lambda_lr,
        )


def _parse_bool(value: str, key: str, lineno) -> bool:
    low = value.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise ConfigError(f"line {lineno}: field '{key}' expects a boolean, got {value!r}")


def _coerce(key: str, value: str, lineno) -> object:
    proto = {f.name: f for f in fields(RunConfig)}[key]
    try:
        if key == "seeds":
            return [int(v) for v in value.split()]
        if key == "updates":
            return int(value)
        if proto.type in ("int", int):
            return int(value)
        if proto.type in ("float", float):
            return float(value)
        if proto.type in ("bool", bool):
            return _parse_bool(value, key, lineno)
        return value
    except ValueError:
        raise ConfigError(
            f"line {lineno}: field '{key}' expects {proto.type}, got {value!r}"
        ) from None


def validate_config(cfg: RunConfig, lineno="?") -> RunConfig:
    if cfg.task not in TASK_SPECS:
        raise ConfigError(
            f"line {lineno}: field 'task' has unknown value {cfg.task!r}; "
            f"expected one of {tuple(TASK_SPECS)}"
        )
    if cfg.algo not in ALGOS:
        raise ConfigError(
            f"line {lineno}: field 'algo' has unknown value {cfg.algo!r}; "
            f"expected one of {ALGOS}"
        )
    if not cfg.seeds:
        raise ConfigError(f"line {lineno}: field 'seeds' must be non-empty")
    if cfg.n_agents < 1 or cfg.n_envs < 1 or cfg.horizon < 1:
        raise ConfigError(f"line {lineno}: n_agents, n_envs, horizon must be positive")
    return cfg


def parse_config(text: str) -> RunConfig:
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    lines = {}
    saw_version = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "schema_version":
            if value != str(CONFIG_SCHEMA_VERSION):
                raise ConfigError(f"line {lineno}: unsupported schema_version {value!r}")
            saw_version = True
            continue
        if key == "seed":  # convenience singular form
            key, value = "seeds", value
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown field {key!r}")
        cfg = replace(cfg, **{key: _coerce(key, value, lineno)})
        lines[key] = lineno
    if not saw_version:
        raise ConfigError("missing schema_version")
    return validate_config(cfg, lines.get("task", "?"))


def load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: RunConfig) -> str:
    lines = [f"schema_version = {CONFIG_SCHEMA_VERSION}"]
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if v is None:
            continue
        if f.name == "seeds":
            lines.append(f"seeds = {' '.join(str(s) for s in v)}")
        elif isinstance(v, bool):
            lines.append(f"{f.name} = {'true' if v else 'false'}")
        elif isinstance(v, float):
            lines.append(f"{f.name} = {v!r}")
        else:
            lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def save_config(cfg: RunConfig, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(format_config(cfg))
