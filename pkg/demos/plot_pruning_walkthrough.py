"""
Pruning a Hydrant classifier
============================

Train the hybrid Hydra + Quant pipeline on a synthetic problem, prune 80% of
its feature sets, and compare accuracy, feature count and inference energy.
"""

import time

import numpy as np

from hydrant import (
    SyntheticSpec,
    generate_synthetic,
    pruning_error_bound,
    split_folds,
    train_pipeline,
    train_pruned,
)

###############################################################################
# Three classes of noisy sinusoids that differ in frequency.
ds = generate_synthetic(
    SyntheticSpec(n=240, d=1, l=128, n_classes=3, kind="sinusoid-frequency", noise=0.5, seed=0)
)
train, test = split_folds(ds, 0)
print(f"train {train.n}  test {test.n}  length {ds.l}")

###############################################################################
# The unpruned pipeline.
full = train_pipeline(train, "hydrant")
print("full   features:", full.n_features, " accuracy:", np.mean(full.predict(test) == test.labels))

###############################################################################
# Pruning fits a temporary ridge model on the full features, ranks every
# feature set by its mean absolute coefficient and keeps the top 20% per
# transform before the final trees are trained.
pruned = train_pruned(train, "hydrant", zeta=0.8)
print("pruned features:", pruned.n_features, " accuracy:", np.mean(pruned.predict(test) == test.labels))
print("kept sets:", pruned.provenance["r"])

###############################################################################
# The pruned linear scores stay within B times the dropped coefficient mass
# of the full scores.
report = pruning_error_bound(pruned.temporary, pruned.decision, pruned.train_features)
print("bound per class    ", np.round(report.bound, 3))
print("observed deviation ", np.round(report.deviation, 3))

###############################################################################
# Inference time shrinks with the number of computed feature sets.
x = test.values.astype(np.float64)
for name, pipe in (("full", full), ("pruned", pruned)):
    t0 = time.perf_counter()
    pipe.predict(x)
    print(f"{name:7s} {1e3 * (time.perf_counter() - t0) / len(x):.3f} ms/sample")
