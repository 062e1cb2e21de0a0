"""A miniature end-to-end run: train the epigraph learner briefly, then
execute with per-step distributed budget solving and compare with a penalty
baseline trained on the same budget.

This is a toy-sized version of the desk-scale benchmark (the full version
lives in tests/test_acceptance.py and persists under runs/smoke).  Expect a
few minutes of CPU time.

Run:  python demos/05_train_and_execute.py
"""

from pathlib import Path

from epimarl.config import RunConfig
from epimarl.runner import eval_run, train_run

OUT = Path("runs/demo_mini")
UPDATES = 60

for algo in ("def-marl", "penalty"):
    cfg = RunConfig(task="target", n_agents=2, algo=algo, horizon=32, n_envs=8,
                    updates=UPDATES, checkpoint_every=30, beta=0.5,
                    out=str(OUT / algo))
    final = train_run(cfg, seed=0, out_dir=OUT / algo,
                      log=lambda s, a=algo: print(f"[{a}] {s}"))
    report = eval_run(final, n_episodes=8, seed=1,
                      dump_dir=OUT / algo / "episodes")
    print(f"{algo}: cost {report['mean_cost']:.4f} +/- {report['std_cost']:.4f}, "
          f"safety {report['mean_safety_rate']:.3f}"
          + (f", solver evals/step {report['solver']['evals_per_step']:.1f}"
             if algo == "def-marl" else ""))

print(f"\nmetrics and episode logs under {OUT}/; plot them with the marlplots "
      "package:")
print(f"  plot-training --in {OUT}/def-marl/metrics.csv {OUT}/penalty/metrics.csv "
      f"--out {OUT}/training.png")
print(f"  plot-trajectory --in {OUT}/def-marl/episodes/episode_000.csv "
      f"--layout {OUT}/def-marl/episodes/episode_000.layout --out {OUT}/ep0.png")
