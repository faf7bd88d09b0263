"""
Prune-rate sweep with the benchmark harness
===========================================

Writes a small dataset to disk, sweeps the prune rate for Quant and reports
accuracy and per-sample inference energy (time x 50 W proxy).
"""

import tempfile
from pathlib import Path

from hydrant import SyntheticSpec, generate_synthetic, save_dataset
from hydrant.bench import RunConfig, sweep_prune_rates

workdir = Path(tempfile.mkdtemp())
ds = generate_synthetic(
    SyntheticSpec(n=150, d=2, l=96, n_classes=2, kind="gaussian-shift", noise=0.6, seed=1, n_folds=3)
)
save_dataset(ds, workdir / "shift")

base = RunConfig(str(workdir / "shift"), method="quant", repeats=3, batch_sizes=(16, 64))
rows = sweep_prune_rates(base, [0.0, 0.2, 0.4, 0.6, 0.8, 0.9])

print(f"{'rate':>5} {'accuracy':>9} {'mJ/sample':>10} {'features':>9}")
for row in rows:
    if row["dataset"] == "mean":
        continue
    print(f"{row['rate']:5.1f} {row['accuracy']:9.3f} {1e3 * row['infer_j_per_sample']:10.3f} {row['n_features']:9.0f}")
