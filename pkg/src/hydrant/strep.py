"""Quality metrics, index scaling, compound scores and rank statistics.

Every property has a direction ``sigma``: ``+1`` when lower values are
better (time, energy) and ``-1`` when higher values are better (accuracy).
Index scaling maps each value onto ``(0, 1]`` relative to the best model of
the same configuration::

    scaled(f, c) = (value(f_best, c) / value(f, c)) ** sigma

and the compound score is a convex combination of scaled properties.
"""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "PropertySpec",
    "MeasurementRecord",
    "DEFAULT_PROPERTIES",
    "QUALITY_METRICS",
    "quality_metrics",
    "index_scale",
    "scale_records",
    "default_weights",
    "compound_score",
    "compound_scores",
    "mean_ranks",
    "nemenyi_critical_distance",
    "read_records",
    "write_records",
    "write_report",
]

QUALITY_METRICS = ("accuracy", "balanced_accuracy", "f1_weighted", "f1_macro", "f1_micro")


@dataclass(frozen=True)
class PropertySpec:
    name: str
    sigma: int
    group: str

    def __post_init__(self):
        if self.sigma not in (1, -1):
            raise ValueError("sigma must be +1 (lower is better) or -1 (higher is better)")
        if self.group not in ("quality", "resources"):
            raise ValueError("group must be 'quality' or 'resources'")


DEFAULT_PROPERTIES = {
    **{name: PropertySpec(name, -1, "quality") for name in QUALITY_METRICS},
    "infer_s_per_sample": PropertySpec("infer_s_per_sample", 1, "resources"),
    "infer_j_per_sample": PropertySpec("infer_j_per_sample", 1, "resources"),
}


@dataclass(frozen=True)
class MeasurementRecord:
    model: str
    config: str
    property: str
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value) or self.value < 0:
            raise ValueError(f"invalid value {self.value!r} for {self.property}")


def quality_metrics(y_true, y_pred, labels=None):
    """Accuracy, balanced accuracy and weighted/macro/micro F1.

    ``labels`` fixes the class universe; a class that is listed but absent
    from ``y_true`` then contributes a recall of 0 to balanced accuracy.
    """
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("no predictions to score")
    explicit = labels is not None
    labels = np.unique(np.concatenate([y_true, y_pred])) if labels is None else np.asarray(labels)
    index = {int(c): i for i, c in enumerate(labels)}
    if not set(np.unique(np.concatenate([y_true, y_pred])).tolist()) <= index.keys():
        raise ValueError("labels outside the given label universe")
    n_cls = len(labels)
    cm = np.zeros((n_cls, n_cls), dtype=np.int64)
    np.add.at(cm, ([index[int(c)] for c in y_true], [index[int(c)] for c in y_pred]), 1)
    tp = np.diag(cm).astype(np.float64)
    support = cm.sum(axis=1).astype(np.float64)
    predicted = cm.sum(axis=0).astype(np.float64)
    recall = np.divide(tp, support, out=np.zeros(n_cls), where=support > 0)
    precision = np.divide(tp, predicted, out=np.zeros(n_cls), where=predicted > 0)
    denom = precision + recall
    f1 = np.divide(2 * precision * recall, denom, out=np.zeros(n_cls), where=denom > 0)
    in_recall = np.ones(n_cls, bool) if explicit else support > 0
    accuracy = tp.sum() / y_true.size
    return {
        "accuracy": float(accuracy),
        "balanced_accuracy": float(recall[in_recall].mean()),
        "f1_weighted": float((f1 * support).sum() / support.sum()),
        "f1_macro": float(f1.mean()),
        # micro-averaged F1 equals accuracy for single-label problems
        "f1_micro": float(accuracy),
    }


def index_scale(values, sigma):
    """Scale ``{model: value}`` of one property and configuration onto (0, 1]."""
    if not values:
        raise ValueError("index scaling needs at least one value")
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    for model, v in values.items():
        if not math.isfinite(v) or v < 0:
            raise ValueError(f"{model}: invalid value {v!r}")
        if v == 0 and sigma == 1:
            raise ValueError(f"{model}: zero value cannot be index-scaled when minimizing")
    if sigma == 1:
        best = min(values.values())
        return {model: best / v for model, v in values.items()}
    best = max(values.values())
    if best == 0:
        raise ValueError("all values are zero; nothing to scale against")
    # (best / v) ** -1, written so that a zero score maps to 0 instead of failing
    return {model: v / best for model, v in values.items()}


def scale_records(records, properties=DEFAULT_PROPERTIES):
    """Index-scale records per (config, property): {(model, config): {property: scaled}}."""
    groups = defaultdict(dict)
    for rec in records:
        if rec.property not in properties:
            continue
        key = (rec.config, rec.property)
        if rec.model in groups[key]:
            raise ValueError(f"duplicate record for {rec.model}/{rec.config}/{rec.property}")
        groups[key][rec.model] = rec.value
    out = defaultdict(dict)
    for (config, prop), values in groups.items():
        for model, scaled in index_scale(values, properties[prop].sigma).items():
            out[(model, config)][prop] = scaled
    return dict(out)


def default_weights(property_names, properties=DEFAULT_PROPERTIES):
    """Half the weight to quality, half to resources, split evenly within each group.

    If only one group is present it receives the full weight.
    """
    groups = defaultdict(list)
    for name in property_names:
        groups[properties[name].group].append(name)
    share = 1.0 / len(groups)
    return {name: share / len(members) for members in groups.values() for name in members}


def _check_weights(weights):
    total = sum(weights.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"weights sum to {total}, expected 1")
    if any(not 0 <= w <= 1 for w in weights.values()):
        raise ValueError("weights must lie in [0, 1]")


def compound_score(scaled, weights):
    """Weighted sum of index-scaled properties."""
    if set(scaled) != set(weights):
        raise ValueError(
            f"weights cover {sorted(weights)} but properties are {sorted(scaled)}"
        )
    _check_weights(weights)
    return float(sum(weights[name] * scaled[name] for name in sorted(scaled)))


def compound_scores(scaled_table, weights=None, properties=DEFAULT_PROPERTIES):
    """Compound score per (model, config) from :func:`scale_records` output."""
    out = {}
    for key, scaled in scaled_table.items():
        w = weights or default_weights(scaled, properties)
        out[key] = compound_score(scaled, w)
    return out


# studentized range quantile q(0.95, m, inf) / sqrt(2)
_NEMENYI_Q05 = {
    2: 1.9600, 3: 2.3437, 4: 2.5690, 5: 2.7278, 6: 2.8497, 7: 2.9483,
    8: 3.0309, 9: 3.1017, 10: 3.1637, 11: 3.2187, 12: 3.2680, 13: 3.3127,
    14: 3.3536, 15: 3.3912, 16: 3.4260, 17: 3.4584, 18: 3.4887, 19: 3.5171,
    20: 3.5438,
}


def nemenyi_critical_distance(n_models, n_configs):
    if n_models not in _NEMENYI_Q05:
        raise ValueError("critical distance table covers 2 to 20 models")
    return _NEMENYI_Q05[n_models] * math.sqrt(n_models * (n_models + 1) / (6.0 * n_configs))


@dataclass
class RankResult:
    models: list
    mean_ranks: np.ndarray
    friedman_chi2: float
    critical_distance: float

    def significantly_different(self, a, b):
        i, j = self.models.index(a), self.models.index(b)
        return abs(self.mean_ranks[i] - self.mean_ranks[j]) > self.critical_distance


def mean_ranks(scores, models=None, higher_is_better=True):
    """Mean rank per model over configurations (rows), ties averaged.

    ``scores`` is ``(n_configs, n_models)``; rank 1 is best.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2:
        raise ValueError("scores must be a (configs, models) matrix")
    n_cfg, m = scores.shape
    if m < 2 or n_cfg < 2:
        raise ValueError("rank analysis needs >= 2 models and >= 2 configurations")
    if np.isnan(scores).any():
        missing = np.argwhere(np.isnan(scores)).tolist()
        raise ValueError(f"missing cells at (config, model) {missing}")
    ranks = rankdata(-scores if higher_is_better else scores, axis=1)
    avg = ranks.mean(axis=0)
    chi2 = 12.0 * n_cfg / (m * (m + 1)) * (np.sum(avg**2) - m * (m + 1) ** 2 / 4.0)
    models = list(models) if models is not None else list(range(m))
    return RankResult(models, avg, float(chi2), nemenyi_critical_distance(m, n_cfg))


def read_records(path):
    """Read JSONL measurement records ``{"model", "config", "property", "value"}``."""
    records = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                records.append(
                    MeasurementRecord(obj["model"], obj["config"], obj["property"], float(obj["value"]))
                )
    return records


def write_records(records, path, mode="a"):
    with open(path, mode) as fh:
        for rec in records:
            fh.write(json.dumps(rec.__dict__) + "\n")


def write_report(records, out_dir, weights=None, properties=DEFAULT_PROPERTIES):
    """Write scaled.csv, compound.csv and ranks.csv; returns the compound table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scaled = scale_records(records, properties)
    props = sorted({p for row in scaled.values() for p in row})
    with open(out_dir / "scaled.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "config", *props])
        for (model, config), row in sorted(scaled.items()):
            w.writerow([model, config, *(row.get(p, "") for p in props)])
    compound = compound_scores(scaled, weights, properties)
    with open(out_dir / "compound.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "config", "compound"])
        for (model, config), value in sorted(compound.items()):
            w.writerow([model, config, value])
    models = sorted({m for m, _ in compound})
    configs = sorted({c for _, c in compound})
    table = np.array([[compound.get((m, c), np.nan) for m in models] for c in configs])
    with open(out_dir / "ranks.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["model", "mean_rank", "friedman_chi2", "critical_distance"])
        complete = table[~np.isnan(table).any(axis=1)]
        if len(models) >= 2 and len(complete) >= 2:
            res = mean_ranks(complete, models)
            for model, rank in zip(models, res.mean_ranks):
                w.writerow([model, rank, res.friedman_chi2, res.critical_distance])
    return compound
