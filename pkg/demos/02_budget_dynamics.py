"""The cost budget z as a state variable.

Collect rollouts under the coupled dynamics (environment steps, budget
decreases by the step cost) and verify two exact identities on the recorded
data: the budget telescopes, and the finite-horizon total value computed
from its definition (worst margin vs cost overrun) equals the backward
recursion V^k = max(h^k, V^{k+1}).

Run:  python demos/02_budget_dynamics.py
"""

import numpy as np

from epimarl.env import make_params
from epimarl.models import init_heads, net_config_for_task
from epimarl.rollout import (
    budget_recursion_gap,
    collect,
    default_zrange,
    estimate_zmax,
    recursion_total_values,
    suffix_total_values,
    telescoping_gap,
)

params = make_params("target", 3, horizon=64)
zrange = default_zrange(params)
print(f"budget sampling range: [{zrange.z_min}, {zrange.z_max:.4f}]")
print(f"(worst step cost x horizon; for the 1.5 arena: {estimate_zmax(params):.4f})\n")

heads = init_heads(np.random.default_rng(0), net_config_for_task("target"))
batch = collect(heads, params, zrange, n_envs=16, seed=3)

print(f"collected {batch.n_transitions} transitions from {batch.n_envs} episodes")
print(f"budget telescoping gap:      {telescoping_gap(batch):.2e}")
print(f"value recursion identity gap: "
      f"{budget_recursion_gap(batch.costs, batch.margins, batch.z):.2e}\n")

# look at one episode's value profile
hmax = batch.margins.max(axis=2)
v_def = suffix_total_values(batch.costs, hmax, batch.z)[0]
v_rec = recursion_total_values(batch.costs, hmax, batch.z)[0]
print("episode 0, every 8th step: z, total value (definition), (recursion)")
for k in range(0, params.horizon + 1, 8):
    print(f"  k={k:3d}  z={batch.z[0, k]:+.4f}  V={v_def[k]:+.4f}  {v_rec[k]:+.4f}")
