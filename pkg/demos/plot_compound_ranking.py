"""
Comparing methods with index scaling and compound scores
========================================================

Run every method, pruned and unpruned, on three datasets, then index-scale
the quality and resource measurements and rank the models.
"""

import tempfile
from pathlib import Path

import numpy as np

from hydrant import SyntheticSpec, generate_synthetic, save_dataset
from hydrant.bench import RunConfig, run_experiment
from hydrant.strep import compound_scores, mean_ranks, scale_records

workdir = Path(tempfile.mkdtemp())
records = []
for seed, kind in enumerate(["sinusoid-frequency", "trend-slope", "gaussian-shift"]):
    ds = generate_synthetic(SyntheticSpec(n=120, d=1, l=64, n_classes=3, kind=kind, noise=0.6, seed=seed, n_folds=3))
    path = workdir / kind
    save_dataset(ds, path)
    for method in ("hydra", "quant", "hydrant"):
        for pruned in (False, True):
            cfg = RunConfig(str(path), method=method, pruned=pruned, zeta=0.8 if pruned else None,
                            repeats=3, batch_sizes=(32,))
            records += run_experiment(cfg).records

###############################################################################
# Default weights give half the mass to the five quality metrics and half to
# per-sample time and energy.
compound = compound_scores(scale_records(records))
models = sorted({m for m, _ in compound})
configs = sorted({c for _, c in compound})
table = np.array([[compound[(m, c)] for m in models] for c in configs])
for m, col in zip(models, table.T):
    print(f"{m:12s} " + " ".join(f"{v:.3f}" for v in col))

result = mean_ranks(table, models)
print("\nmean ranks:", {m: round(float(r), 2) for m, r in zip(models, result.mean_ranks)})
print(f"Friedman chi2 {result.friedman_chi2:.2f}, critical distance {result.critical_distance:.2f}")
