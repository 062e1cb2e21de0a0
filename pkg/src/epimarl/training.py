"""Centralized training.

The epigraph trainer fits the two critics by regression and the policy by a
clipped-ratio step on total-value advantages:

* cost-value targets: standard discounted TD(lambda) on the team cost;
* constraint-value targets: an undiscounted lambda-weighted max backup
  T^h_k = (1-lam) max(h_k, V^h_{k+1}) + lam max(h_k, T^h_{k+1}),
  which at lam=1 is exactly the max of h over the remaining horizon and at
  lam=0 the one-step max backup (the max-over-time analogue of TD(lambda);
  no discount because the target quantity is a maximum, not a sum);
* per-agent advantages: assembled total-value target max{T^h_i, T^l - z}
  minus the assembled prediction, normalized batch-wide.

Advantages follow the cost convention (positive = worse than predicted) and
are negated inside the clipped objective, which is written in the usual
reward convention.

The penalty and Lagrangian baselines reuse the same machinery on a penalized
cost with the budget pinned to zero; the Lagrangian multiplier can only grow
while violations persist.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .models import (
    NetConfig,
    ValueHeads,
    gaussian_entropy,
    policy_forward,
    squashed_log_prob,
    vh_forward,
    vl_forward,
)
from .nn import autodiff as ad
from .nn.autodiff import Tensor
from .nn.layers import GraphBatch
from .rollout import RolloutBatch


@dataclass(frozen=True)
class TrainConfig:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_eps: float = 0.25
    ppo_epochs: int = 1
    entropy_coef: float = 0.01
    policy_lr: float = 3e-4
    vl_lr: float = 1e-3
    # the hyperparameter tables pin only the cost-value rate; the constraint
    # critic uses the same value
    vh_lr: float = 1e-3
    grad_clip_norm: float = 2.0
    adv_std_floor: float = 1e-8


@dataclass(frozen=True)
class BaselineConfig:
    """Penalty / Lagrangian trainer settings.

    mode "penalty": cost l + beta * max(h, 0).
    mode "lagr":    cost l + lambda * max(h, 0), dual ascent on lambda with
                    the summed per-episode violation.
    mode "lagr-mot": as "lagr" but the constraint enters through the
                    max-over-time critic instead of the violation sum.
    """

    mode: str
    beta: float = 0.5
    lambda0: float = 1.0
    lambda_lr: float = 1e-7

    def __post_init__(self):
        if self.mode not in ("penalty", "lagr", "lagr-mot"):
            raise ValueError(f"unknown baseline mode {self.mode!r}")
        if self.beta < 0 or self.lambda0 < 0:
            raise ValueError("penalty weights must be nonnegative")


class TrainingDivergedError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# target recursions


def gae_targets(costs: np.ndarray, values: np.ndarray, gamma: float, lam: float
                ) -> np.ndarray:
    """Discounted TD(lambda) regression targets for the cost critic.

    costs (B, T), values (B, T+1) evaluated along the batch including the
    bootstrap at the horizon cut.  Returns (B, T) targets = GAE + value.
    """
    B, T = costs.shape
    adv = np.zeros((B, T))
    running = np.zeros(B)
    for k in range(T - 1, -1, -1):
        delta = costs[:, k] + gamma * values[:, k + 1] - values[:, k]
        running = delta + gamma * lam * running
        adv[:, k] = running
    return adv + values[:, :T]


def max_backup_targets(margins: np.ndarray, vh_values: np.ndarray, lam: float
                       ) -> np.ndarray:
    """Lambda-weighted max-backup targets for the constraint critic.

    margins (B, T+1, N) per-agent h along the batch, vh_values (B, T+1, N)
    critic evaluations (index T is the bootstrap).  Undiscounted: the target
    estimates a maximum over the remaining horizon, not a discounted sum.
    Returns (B, T, N).
    """
    B, Tp1, N = margins.shape
    T = Tp1 - 1
    out = np.zeros((B, T, N))
    running = vh_values[:, T]
    for k in range(T - 1, -1, -1):
        one_step = np.maximum(margins[:, k], vh_values[:, k + 1])
        running = (1.0 - lam) * one_step + lam * np.maximum(margins[:, k], running)
        out[:, k] = running
    return out


def normalize_advantages(adv: np.ndarray, std_floor: float = 1e-8) -> np.ndarray:
    return (adv - adv.mean()) / (adv.std() + std_floor)


def total_value_advantages(batch: RolloutBatch, vl_values: np.ndarray,
                           vh_values: np.ndarray, config: TrainConfig
                           ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(normalized per-agent advantages (B, T, N), vl targets, vh targets).

    Advantage = max{T^h_i, T^l - z} - max{V^h_i, V^l - z}, cost convention.
    """
    T = batch.horizon
    tl = gae_targets(batch.costs, vl_values, config.gamma, config.gae_lambda)
    th = max_backup_targets(batch.margins, vh_values, config.gae_lambda)
    z = batch.z[:, :T]
    target_total = np.maximum(th, (tl - z)[:, :, None])
    value_total = np.maximum(vh_values[:, :T], (vl_values[:, :T] - z)[:, :, None])
    adv = normalize_advantages(target_total - value_total, config.adv_std_floor)
    return adv, tl, th


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def clip_grad_norm(params: dict[str, Tensor], max_norm: float) -> float:
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad * p.grad).sum())
    norm = float(np.sqrt(total))
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params.values():
            if p.grad is not None:
                p.grad = p.grad * scale  # gradients may alias graph buffers
    return norm


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    state.t += 1
    b1c = 1.0 - beta1**state.t
    b2c = 1.0 - beta2**state.t
    for name in sorted(params):
        p = params[name]
        if p.grad is None:
            continue
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        state.m[name] = beta1 * state.m[name] + (1.0 - beta1) * p.grad
        state.v[name] = beta2 * state.v[name] + (1.0 - beta2) * p.grad**2
        p.data = p.data - lr * (state.m[name] / b1c) / (np.sqrt(state.v[name] / b2c) + eps)


def zero_grads(params: dict[str, Tensor]) -> None:
    for p in params.values():
        p.grad = None


# ---------------------------------------------------------------------------
# loss pieces


def clipped_objective(ratio: Tensor, advantages: np.ndarray, clip_eps: float) -> Tensor:
    """PPO pessimistic clipped objective, reward convention, elementwise."""
    adv = Tensor(advantages)
    return ad.minimum(ratio * adv, ad.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv)


def graph_prefix(gb: GraphBatch, n_graphs: int) -> GraphBatch:
    """First n_graphs graphs of a batch (graphs are stored contiguously)."""
    if n_graphs == gb.n_graphs:
        return gb
    n_nodes = int(np.searchsorted(gb.node_graph, n_graphs))
    n_edges = int(np.searchsorted(gb.receivers, n_nodes))
    return GraphBatch(
        node_x=gb.node_x[:n_nodes],
        edge_x=gb.edge_x[:n_edges],
        senders=gb.senders[:n_edges],
        receivers=gb.receivers[:n_edges],
        node_graph=gb.node_graph[:n_nodes],
        n_graphs=n_graphs,
        centers=gb.centers[:n_graphs] if gb.centers is not None else None,
    )


def _policy_step(heads: ValueHeads, batch: RolloutBatch, advantages_btn: np.ndarray,
                 config: TrainConfig, opt: AdamState) -> dict:
    """One clipped-ratio gradient step; advantages arrive in cost convention."""
    cfg = heads.net_config
    T, B, N = batch.horizon, batch.n_envs, batch.n_agents
    obs_T = graph_prefix(batch.obs, T * B * N)
    z_T = batch.obs_z()[: T * B * N]
    # graph order is (t, env, agent); bring the batch arrays to match
    u_pre = batch.u_pre.transpose(1, 0, 2, 3).reshape(T * B * N, -1)
    logp_old = batch.log_probs.transpose(1, 0, 2).reshape(-1)
    adv = -advantages_btn.transpose(1, 0, 2).reshape(-1)  # to reward convention

    mean_t, log_std_t = policy_forward(heads.policy, obs_T, z_T, cfg)
    logp_new = squashed_log_prob(mean_t, log_std_t, u_pre)
    ratio = ad.exp(logp_new - Tensor(logp_old))
    objective = ad.tmean(clipped_objective(ratio, adv, config.clip_eps))
    entropy = gaussian_entropy(log_std_t)
    loss = (-objective) - Tensor(config.entropy_coef) * entropy
    if not np.isfinite(loss.data):
        raise TrainingDivergedError("policy loss is non-finite")
    zero_grads(heads.policy)
    ad.backward(loss)
    grad_norm = clip_grad_norm(heads.policy, config.grad_clip_norm)
    adam_step(heads.policy, opt, config.policy_lr)
    approx_kl = float(np.mean(logp_old - logp_new.data))
    return {
        "policy_loss": float(loss.data),
        "entropy": float(entropy.data),
        "approx_kl": approx_kl,
        "policy_grad_norm": grad_norm,
        "ratio_mean": float(np.mean(np.exp(logp_new.data - logp_old))),
    }


def _value_step(params: dict, pred: Tensor, targets_flat: np.ndarray, lr: float,
                config: TrainConfig, opt: AdamState, what: str) -> float:
    n = targets_flat.shape[0]
    pred_T = ad.gather_rows(pred, np.arange(n))
    loss = ad.tmean(ad.square(pred_T - Tensor(targets_flat)))
    if not np.isfinite(loss.data):
        raise TrainingDivergedError(f"{what} loss is non-finite")
    zero_grads(params)
    ad.backward(loss)
    clip_grad_norm(params, config.grad_clip_norm)
    adam_step(params, opt, lr)
    return float(loss.data)


def _batch_metrics(batch: RolloutBatch) -> dict:
    episode_cost = batch.costs.sum(axis=1)
    safe = np.all(batch.margins <= 0.0, axis=1)  # (B, N)
    return {
        "mean_cost": float(episode_cost.mean()),
        "safety_rate": float(safe.mean()),
    }


# ---------------------------------------------------------------------------
# trainers


class Trainer:
    """Holds heads, optimizer state, and (for baselines) the multiplier.

    ``algo`` is "def-marl", "penalty", "lagr", or "lagr-mot"; the baselines
    need a BaselineConfig.
    """

    def __init__(self, heads: ValueHeads, config: TrainConfig,
                 baseline: BaselineConfig | None = None, algo: str = "def-marl"):
        self.heads = heads
        self.config = config
        self.baseline = baseline
        self.algo = algo
        if algo != "def-marl" and baseline is None:
            raise ValueError(f"algorithm {algo!r} needs a BaselineConfig")
        self.opt = {"pi": AdamState(), "vl": AdamState(), "vh": AdamState()}
        self.lam = float(baseline.lambda0) if baseline and algo.startswith("lagr") else 0.0
        self._t0 = time.monotonic()

    @property
    def uses_budget(self) -> bool:
        return self.algo == "def-marl"

    def update(self, batch: RolloutBatch) -> dict:
        if self.algo == "def-marl":
            metrics = self._epigraph_update(batch)
        else:
            metrics = self._baseline_update(batch)
        metrics.update(_batch_metrics(batch))
        metrics["wallclock"] = time.monotonic() - self._t0
        return metrics

    # -- epigraph trainer

    def _epigraph_update(self, batch: RolloutBatch) -> dict:
        heads, config = self.heads, self.config
        cfg = heads.net_config
        T, B, N = batch.horizon, batch.n_envs, batch.n_agents
        metrics: dict = {}
        for _ in range(config.ppo_epochs):
            vl_pred = vl_forward(heads.cost_value, batch.glob, batch.glob_z(), cfg)
            vh_pred = vh_forward(heads.constraint_value, batch.obs, batch.obs_z(), cfg)
            vl_values = vl_pred.data.reshape(T + 1, B).T
            vh_values = vh_pred.data.reshape(T + 1, B, N).transpose(1, 0, 2)
            adv, tl, th = total_value_advantages(batch, vl_values, vh_values, config)

            metrics = _policy_step(heads, batch, adv, config, self.opt["pi"])
            metrics["vl_loss"] = _value_step(
                heads.cost_value, vl_pred, tl.T.reshape(-1), config.vl_lr, config,
                self.opt["vl"], "cost value",
            )
            metrics["vh_loss"] = _value_step(
                heads.constraint_value, vh_pred, th.transpose(1, 0, 2).reshape(-1),
                config.vh_lr, config, self.opt["vh"], "constraint value",
            )
        metrics["lambda"] = float("nan")
        return metrics

    # -- penalty / Lagrangian baselines

    def penalized_costs(self, batch: RolloutBatch) -> np.ndarray:
        """Per-step cost surrogate l + coef * max(h, 0) with the team h."""
        hmax = batch.margins[:, : batch.horizon].max(axis=2)
        violation = np.maximum(hmax, 0.0)
        coef = self.baseline.beta if self.baseline.mode == "penalty" else self.lam
        if self.baseline.mode == "lagr-mot":
            coef = 0.0  # the constraint enters through the critic instead
        return batch.costs + coef * violation

    def _baseline_update(self, batch: RolloutBatch) -> dict:
        heads, config, baseline = self.heads, self.config, self.baseline
        cfg = heads.net_config
        T, B, N = batch.horizon, batch.n_envs, batch.n_agents
        metrics: dict = {}
        for _ in range(config.ppo_epochs):
            costs = self.penalized_costs(batch)
            vl_pred = vl_forward(heads.cost_value, batch.glob, batch.glob_z(), cfg)
            vl_values = vl_pred.data.reshape(T + 1, B).T
            tl = gae_targets(costs, vl_values, config.gamma, config.gae_lambda)
            adv_team = tl - vl_values[:, :T]  # (B, T), cost convention

            if baseline.mode == "lagr-mot":
                vh_pred = vh_forward(heads.constraint_value, batch.obs, batch.obs_z(), cfg)
                vh_values = vh_pred.data.reshape(T + 1, B, N).transpose(1, 0, 2)
                th = max_backup_targets(batch.margins, vh_values, config.gae_lambda)
                adv = adv_team[:, :, None] + self.lam * (th - vh_values[:, :T])
            else:
                adv = np.broadcast_to(adv_team[:, :, None], (B, T, N)).copy()
            adv = normalize_advantages(adv, config.adv_std_floor)

            metrics = _policy_step(heads, batch, adv, config, self.opt["pi"])
            metrics["vl_loss"] = _value_step(
                heads.cost_value, vl_pred, tl.T.reshape(-1), config.vl_lr, config,
                self.opt["vl"], "cost value",
            )
            if baseline.mode == "lagr-mot":
                metrics["vh_loss"] = _value_step(
                    heads.constraint_value, vh_pred, th.transpose(1, 0, 2).reshape(-1),
                    config.vh_lr, config, self.opt["vh"], "constraint value",
                )
            else:
                metrics["vh_loss"] = float("nan")

        if baseline.mode == "lagr":
            hmax = batch.margins[:, : batch.horizon].max(axis=2)
            episode_violation = np.maximum(hmax, 0.0).sum(axis=1)  # (B,)
            self.lam = max(0.0, self.lam + baseline.lambda_lr * float(episode_violation.mean()))
        elif baseline.mode == "lagr-mot":
            worst = batch.margins.max(axis=(1, 2))  # max over time and agents
            self.lam = max(0.0, self.lam + baseline.lambda_lr * float(np.maximum(worst, 0.0).mean()))
        metrics["lambda"] = self.lam if self.algo.startswith("lagr") else float("nan")
        return metrics
