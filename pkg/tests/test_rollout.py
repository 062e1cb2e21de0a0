"""Rollout collection: budget telescoping, determinism, batch shapes, the
training-range estimate, the value-recursion identity, and debug dumps."""

import numpy as np
import pytest

import epimarl.rollout as rollout_mod
from epimarl.env import make_params
from epimarl.models import init_heads, net_config_for_task
from epimarl.rollout import (
    RolloutBatch,
    ZRange,
    budget_recursion_gap,
    collect,
    default_zrange,
    estimate_zmax,
    telescoping_gap,
    write_batch_csv,
)


@pytest.fixture(scope="module")
def small_setup():
    params = make_params("target", 2, horizon=16)
    heads = init_heads(np.random.default_rng(0), net_config_for_task("target"))
    return params, heads, default_zrange(params)


def test_zrange_requires_order():
    with pytest.raises(ValueError):
        ZRange(1.0, 1.0)


def test_estimate_zmax_formula():
    params = make_params("target", 3)  # arena 1.5, horizon 128
    expected = (1.5 * np.sqrt(2.0) * 0.01 + 0.001 + 2.0 * 0.0001) * 128
    assert estimate_zmax(params) == pytest.approx(expected, rel=1e-12)


def test_estimate_zmax_without_control_weight():
    params = make_params("target", 3)
    expected = (1.5 * np.sqrt(2.0) * 0.01 + 0.001) * 128
    assert estimate_zmax(params, w_control=0.0) == pytest.approx(expected, rel=1e-12)


def test_estimate_zmax_linear_in_horizon():
    a = estimate_zmax(make_params("target", 3, horizon=64))
    b = estimate_zmax(make_params("target", 3, horizon=128))
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_budget_telescopes_with_constant_cost(small_setup, monkeypatch):
    params, heads, zrange = small_setup
    c = 0.03125

    def constant_cost(state, control, p):
        return np.full(state.n_envs, c)

    monkeypatch.setattr(rollout_mod, "team_cost_vec", constant_cost)
    batch = collect(heads, params, zrange, n_envs=3, seed=5)
    expected = batch.z0[:, None] - c * np.arange(params.horizon + 1)[None, :]
    assert np.allclose(batch.z, expected, atol=1e-12)


def test_collect_deterministic(small_setup):
    params, heads, zrange = small_setup
    a = collect(heads, params, zrange, n_envs=4, seed=9)
    b = collect(heads, params, zrange, n_envs=4, seed=9)
    assert np.array_equal(a.actions, b.actions)
    assert np.array_equal(a.z, b.z)
    assert np.array_equal(a.obs.node_x, b.obs.node_x)
    assert np.array_equal(a.log_probs, b.log_probs)


def test_collect_seed_changes_batch(small_setup):
    params, heads, zrange = small_setup
    a = collect(heads, params, zrange, n_envs=4, seed=9)
    b = collect(heads, params, zrange, n_envs=4, seed=10)
    assert not np.array_equal(a.actions, b.actions)


def test_batch_size_contract():
    params = make_params("target", 3, horizon=128)
    heads = init_heads(np.random.default_rng(0), net_config_for_task("target"))
    batch = collect(heads, params, default_zrange(params), n_envs=128, seed=0)
    assert batch.n_transitions == 16384
    assert batch.obs.n_graphs == 129 * 128 * 3
    assert batch.glob.n_graphs == 129 * 128
    assert batch.margins.shape == (128, 129, 3)


def test_telescoping_identity(small_setup):
    params, heads, zrange = small_setup
    batch = collect(heads, params, zrange, n_envs=8, seed=2)
    assert telescoping_gap(batch) <= 1e-9


def test_value_recursion_identity(small_setup):
    params, heads, zrange = small_setup
    batch = collect(heads, params, zrange, n_envs=8, seed=3)
    assert budget_recursion_gap(batch.costs, batch.margins, batch.z) <= 1e-9


def test_recursion_checker_detects_sign_flip(small_setup):
    # mutation sanity: corrupt the budget dynamics and the identity must fail
    params, heads, zrange = small_setup
    batch = collect(heads, params, zrange, n_envs=4, seed=4)
    corrupted = batch.z0[:, None] + np.concatenate(
        [np.zeros((4, 1)), np.cumsum(batch.costs, axis=1)], axis=1
    )
    assert budget_recursion_gap(batch.costs, batch.margins, corrupted) > 1e-3


def test_frozen_budget_for_baselines(small_setup):
    params, heads, zrange = small_setup
    batch = collect(heads, params, zrange, n_envs=4, seed=6, freeze_z=True)
    assert np.array_equal(batch.z, np.zeros_like(batch.z))


def test_budget_alignment_with_graph_order(small_setup):
    params, heads, zrange = small_setup
    batch = collect(heads, params, zrange, n_envs=3, seed=7)
    T, B, N = params.horizon, 3, 2
    obs_z = batch.obs_z()
    # graph t*(B*N) + b*N + i must carry z[b, t]
    for t, b, i in [(0, 0, 0), (0, 2, 1), (5, 1, 0), (T, 2, 1)]:
        assert obs_z[t * B * N + b * N + i] == batch.z[b, t]
    glob_z = batch.glob_z()
    for t, b in [(0, 1), (7, 2), (T, 0)]:
        assert glob_z[t * B + b] == batch.z[b, t]


def test_batch_csv_dump(tmp_path, small_setup):
    params, heads, zrange = small_setup
    batch = collect(heads, params, zrange, n_envs=2, seed=8)
    path = tmp_path / "batch_env0.csv"
    write_batch_csv(batch, 0, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == params.horizon + 2  # header + T+1 records
    header = lines[0].split(",")
    assert header[-2:] == ["logp0", "logp1"]
    assert header[0] == "k"


def test_nan_policy_output_aborts(small_setup):
    params, heads, zrange = small_setup
    import copy

    heads_bad = copy.deepcopy(heads)
    heads_bad.policy["pi.head.l2.b"].data[:] = np.nan  # final bias, after ReLUs
    with pytest.raises(rollout_mod.RolloutDivergedError):
        collect(heads_bad, params, zrange, n_envs=2, seed=1)
