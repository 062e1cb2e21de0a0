"""Exact solvers and behavioral verification on tabular instances.

For each instance the module computes, by brute force:

* the inner problem: for any budget z, the sequence minimizing
  max(worst margin along the trajectory, total cost - z), ties broken
  lexicographically;
* the constrained optimum: cheapest all-safe sequence (direct enumeration);
* the central outer threshold z*: smallest grid budget whose inner argmin
  keeps every agent safe;
* the epigraph outer threshold: smallest grid budget with inner value <= 0;
* the distributed outer solution: per agent, the smallest grid budget whose
  inner argmin keeps that agent safe, combined by max.

Verified properties (exact equality; all arithmetic is dyadic):

* value-recursion identity: the backward recursion with the budget update
  z' = z - l reproduces the suffix definition of the total value along any
  trajectory;
* inner-optimality: the argmin at z* costs exactly the constrained optimum;
* distributed equivalence: max_i z_i equals z*;
* budget monotonicity: for grid budgets above z*, the argmin's worst margin
  never exceeds the one at z*;
* epigraph equivalence: the inner value crosses 0 exactly at the smallest
  grid point at or above the constrained optimum;
* a memoized closed-loop dynamic program reproduces the enumerated inner
  value (two independent solvers, exact agreement).

Instances whose cost map is ambiguous (two budgets whose distinct argmin
sequences share one cost) or whose per-agent argmin safety is not monotone
in the budget violate the uniqueness premise the distributed equivalence
relies on; they are rejected up front, counted, and regenerated.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .tabular import (
    N_JOINT,
    SequenceTable,
    TabularMAS,
    build_zgrid,
    enumerate_sequences,
    generate_instance,
    sequence_trajectory,
    step_cells,
)


@dataclass
class InnerSolution:
    value: float
    argmin: int  # sequence index (lexicographic tie-break)


def exact_inner(mas: TabularMAS, x0: tuple[int, int], z: float,
                table: SequenceTable | None = None) -> InnerSolution:
    """Minimize max(worst margin, cost - z) over all open-loop sequences."""
    if table is None:
        table = enumerate_sequences(mas, x0)
    values = np.maximum(table.maxh, table.suml - z)
    idx = int(np.argmin(values))
    return InnerSolution(value=float(values[idx]), argmin=idx)


def _grid_argmins(table: SequenceTable, zgrid: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray]:
    """(argmin index per grid budget, inner value per grid budget)."""
    values = np.maximum(table.maxh[None, :], table.suml[None, :] - zgrid[:, None])
    idx = np.argmin(values, axis=1)
    return idx, values[np.arange(zgrid.size), idx]


@dataclass
class CentralOuter:
    z_star: float | None  # smallest grid budget with an all-safe argmin
    z_epigraph: float | None  # smallest grid budget with inner value <= 0
    constrained_optimum: float | None  # cheapest all-safe sequence cost
    argmin_at_z_star: int | None
    feasible: bool


def exact_outer_central(mas: TabularMAS, x0: tuple[int, int], zgrid: np.ndarray,
                        table: SequenceTable | None = None) -> CentralOuter:
    if table is None:
        table = enumerate_sequences(mas, x0)
    safe = table.maxh <= 0.0
    if not safe.any():
        return CentralOuter(None, None, None, None, False)
    constrained_optimum = float(table.suml[safe].min())

    idx, values = _grid_argmins(table, zgrid)
    argmin_safe = table.maxh[idx] <= 0.0
    z_star_pos = int(np.argmax(argmin_safe)) if argmin_safe.any() else None
    value_ok = values <= 0.0
    z_epi_pos = int(np.argmax(value_ok)) if value_ok.any() else None
    return CentralOuter(
        z_star=float(zgrid[z_star_pos]) if z_star_pos is not None else None,
        z_epigraph=float(zgrid[z_epi_pos]) if z_epi_pos is not None else None,
        constrained_optimum=constrained_optimum,
        argmin_at_z_star=int(idx[z_star_pos]) if z_star_pos is not None else None,
        feasible=True,
    )


@dataclass
class DistributedOuter:
    z_i: list[float]
    z_distributed: float


def exact_outer_distributed(mas: TabularMAS, x0: tuple[int, int], zgrid: np.ndarray,
                            table: SequenceTable | None = None) -> DistributedOuter | None:
    """Per-agent smallest grid budget whose inner argmin keeps the agent
    safe, combined with max; None when some agent is never safe."""
    if table is None:
        table = enumerate_sequences(mas, x0)
    idx, _ = _grid_argmins(table, zgrid)
    z_i = []
    for agent in range(table.maxh_agents.shape[1]):
        ok = table.maxh_agents[idx, agent] <= 0.0
        if not ok.any():
            return None
        z_i.append(float(zgrid[int(np.argmax(ok))]))
    return DistributedOuter(z_i=z_i, z_distributed=float(max(z_i)))


# ---------------------------------------------------------------------------
# independent recursion oracle (closed-loop dynamic program)


def dp_inner_value(mas: TabularMAS, x0: tuple[int, int], z: float) -> float:
    """Optimal total value by memoized backward recursion over
    (state, remaining budget, step); independent of the flat enumeration."""
    H = mas.horizon
    hmax = mas.h_table.max(axis=0)
    cache: dict[tuple[int, int, float, int], float] = {}

    def rec(c1: int, c2: int, z_rem: float, k: int) -> float:
        key = (c1, c2, z_rem, k)
        if key in cache:
            return cache[key]
        h = hmax[c1, c2]
        if k == H:
            out = max(h, -z_rem)
        else:
            best = np.inf
            for a in range(N_JOINT):
                n1, n2 = step_cells(c1, c2, a, mas.n_cells)
                best = min(best, rec(int(n1), int(n2), z_rem - mas.l_table[c1, c2, a], k + 1))
            out = max(h, best)
        cache[key] = out
        return out

    return rec(x0[0], x0[1], float(z), 0)


def recursion_identity_gap(mas: TabularMAS, x0: tuple[int, int], seq_index: int,
                           z0: float) -> float:
    """Max |suffix definition - backward recursion| of the total value along
    one trajectory with the budget following z' = z - l.  Exactly 0 here."""
    _, costs, margins = sequence_trajectory(mas, x0, seq_index)
    hmax = margins.max(axis=1)
    H = costs.shape[0]
    z = np.zeros(H + 1)
    z[0] = z0
    for k in range(H):
        z[k + 1] = z[k] - costs[k]
    suffix_h = np.flip(np.maximum.accumulate(np.flip(hmax)))
    suffix_l = np.concatenate([np.flip(np.cumsum(np.flip(costs))), [0.0]])
    v_def = np.maximum(suffix_h, suffix_l - z)
    v_rec = np.zeros(H + 1)
    v_rec[H] = max(hmax[H], -z[H])
    for k in range(H - 1, -1, -1):
        v_rec[k] = max(hmax[k], v_rec[k + 1])
    return float(np.abs(v_def - v_rec).max())


# ---------------------------------------------------------------------------
# premise screening


def premise_rejection_reason(table: SequenceTable, zgrid: np.ndarray) -> str | None:
    """None if the instance satisfies the uniqueness premise, else why not.

    Rejected when (a) two grid budgets have distinct argmin sequences with
    identical cost (the budget-to-cost map is ambiguous), or (b) some
    agent's argmin safety is not monotone in the budget (equivalently, the
    per-agent feasible budget set is not an upper interval), which is the
    behavioral footprint of a premise violation on a finite grid.
    """
    idx, _ = _grid_argmins(table, zgrid)
    uniq = np.unique(idx)
    costs = table.suml[uniq]
    order = np.argsort(costs, kind="stable")
    sorted_costs = costs[order]
    dup = np.nonzero(np.diff(sorted_costs) == 0.0)[0]
    if dup.size:
        return "two distinct argmin sequences share one cost"
    for agent in range(table.maxh_agents.shape[1]):
        ok = table.maxh_agents[idx, agent] <= 0.0
        if ok.any():
            first = int(np.argmax(ok))
            if not ok[first:].all():
                return f"agent {agent} argmin safety not monotone in budget"
    ok_all = table.maxh[idx] <= 0.0
    if ok_all.any():
        first = int(np.argmax(ok_all))
        if not ok_all[first:].all():
            return "team argmin safety not monotone in budget"
    return None


# ---------------------------------------------------------------------------
# per-instance verification


@dataclass
class InstanceReport:
    seed: int
    n_cells: int = 0
    horizon: int = 0
    status: str = "pass"  # pass | infeasible | premise_rejected | fail
    reason: str = ""
    z_star: float | None = None
    z_distributed: float | None = None
    constrained_optimum: float | None = None
    checks: dict = field(default_factory=dict)


def verify_instance(seed: int, rng: np.random.Generator | None = None) -> InstanceReport:
    mas, x0 = generate_instance(seed)
    report = InstanceReport(seed=seed, n_cells=mas.n_cells, horizon=mas.horizon)
    table = enumerate_sequences(mas, x0)
    zgrid = build_zgrid(table, mas.nu)

    central = exact_outer_central(mas, x0, zgrid, table)
    if not central.feasible:
        report.status = "infeasible"
        report.reason = "no all-safe sequence exists"
        return report
    reason = premise_rejection_reason(table, zgrid)
    if reason is not None:
        report.status = "premise_rejected"
        report.reason = reason
        return report

    distributed = exact_outer_distributed(mas, x0, zgrid, table)
    report.z_star = central.z_star
    report.z_distributed = distributed.z_distributed if distributed else None
    report.constrained_optimum = central.constrained_optimum

    idx, values = _grid_argmins(table, zgrid)
    z_star_pos = int(np.nonzero(zgrid == central.z_star)[0][0])

    checks = {}
    checks["distributed_matches_central"] = (
        distributed is not None and distributed.z_distributed == central.z_star
    )
    checks["argmin_cost_is_constrained_optimum"] = (
        float(table.suml[central.argmin_at_z_star]) == central.constrained_optimum
    )
    worst_at_star = float(table.maxh[idx[z_star_pos]])
    sweep = table.maxh[idx[z_star_pos:]]
    checks["margin_monotone_beyond_threshold"] = bool(np.all(sweep <= worst_at_star))
    epi_expected = float(zgrid[int(np.argmax(zgrid >= central.constrained_optimum))])
    checks["epigraph_threshold_matches_constrained_optimum"] = (
        central.z_epigraph == epi_expected
    )
    z_epi_pos = int(np.nonzero(zgrid == central.z_epigraph)[0][0])
    checks["epigraph_argmin_cost_matches"] = (
        float(table.suml[idx[z_epi_pos]]) == central.constrained_optimum
    )

    rng = rng or np.random.default_rng(seed + 1)
    z_probe = float(zgrid[rng.integers(0, zgrid.size)])
    dp = dp_inner_value(mas, x0, z_probe)
    enum = exact_inner(mas, x0, z_probe, table).value
    checks["recursion_dp_matches_enumeration"] = dp == enum
    seq_probe = int(rng.integers(0, table.n_sequences))
    checks["value_recursion_identity"] = (
        recursion_identity_gap(mas, x0, seq_probe, z_probe) == 0.0
    )

    report.checks = {k: bool(v) for k, v in checks.items()}
    if not all(report.checks.values()):
        report.status = "fail"
        report.reason = ", ".join(k for k, v in report.checks.items() if not v)
    return report


@dataclass
class VerificationReport:
    n_target: int
    passed: int = 0
    failed: int = 0
    infeasible_regenerated: int = 0
    premise_regenerated: int = 0
    instances: list[InstanceReport] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.failed == 0 and self.passed >= self.n_target

    def to_json(self) -> str:
        return json.dumps(
            {
                "ok": self.ok,
                "passed": self.passed,
                "failed": self.failed,
                "infeasible_regenerated": self.infeasible_regenerated,
                "premise_regenerated": self.premise_regenerated,
                "instances": [asdict(r) for r in self.instances],
            },
            indent=2,
        )


def run_verification(n_instances: int = 100, seed0: int = 0,
                     max_attempts: int = 2000) -> VerificationReport:
    """Verify instances until n_instances pass, regenerating (and counting)
    rejected ones.  Failed checks are never regenerated away."""
    report = VerificationReport(n_target=n_instances)
    seed = seed0
    attempts = 0
    while report.passed < n_instances and attempts < max_attempts:
        inst = verify_instance(seed)
        report.instances.append(inst)
        if inst.status == "pass":
            report.passed += 1
        elif inst.status == "infeasible":
            report.infeasible_regenerated += 1
        elif inst.status == "premise_rejected":
            report.premise_regenerated += 1
        else:
            report.failed += 1
        seed += 1
        attempts += 1
    return report


def write_report(report: VerificationReport, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.to_json())
