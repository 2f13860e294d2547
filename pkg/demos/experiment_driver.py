"""Seeded experiments: a phase transition and a noisy error-scaling sweep.

The same configs run from Python or through `ripless run --config ...`;
results are plain CSV with a config.json sidecar, and any (cell, trial)
replays bit-identically, which is what makes a surprising row debuggable
a week later.
"""

import math

import numpy as np

from ripless import EnsembleSpec, ExperimentConfig, GridCell, replay_trial, run_experiment

n, s = 128, 4
unit = math.ceil(s * math.log(n))

# noiseless success rate as m grows
phase = ExperimentConfig(
    kind="phase_transition",
    ensemble=EnsembleSpec("subsampled_dft", n),
    grid=tuple(GridCell(n, s, k * unit) for k in (1, 2, 3, 5)),
    trials=40,
    seed=99,
)
result = run_experiment(phase, threads=4)
print(result.csv_text())

# one trial replayed verbatim from the config
trial = replay_trial(phase, cell=3, trial=7)
print(f"replayed cell 3 trial 7: success={trial['success']}"
      f" rel_error={trial['rel_error']:.2e}\n")

# median squared error halves when m doubles
scaling = ExperimentConfig(
    kind="error_scaling",
    ensemble=EnsembleSpec("gaussian", n),
    grid=tuple(GridCell(n, s, k * unit, sigma=0.5) for k in (8, 16, 32)),
    trials=30,
    seed=99,
    program="lasso",
)
result = run_experiment(scaling, threads=4)
for rec in result.records:
    print(f"m = {rec['m']:4d}   median squared error {rec['l2_sq_median']:.4f}"
          f"   reference bound {rec['l2_bound']:.4f}")
print(f"fitted slope vs log(s/m): "
      f"{result.metadata['slope_log_err2_vs_log_s_over_m']:.3f} (1 is the model rate)")
