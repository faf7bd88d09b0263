"""Post-training pruning of Hydra/Quant feature sets.

A temporary ridge model on the full concatenated features ranks every feature
set by its mean absolute coefficient. Per origin, only the top
``round((1 - zeta) * S)`` sets are retained, the transforms are pruned so the
dropped sets are never computed, and the final classifier is refit on the
reduced features.

Because the temporary model is linear, dropping sets changes its scores by at
most ``B * sum(|beta_i|)`` over the dropped coefficients, where ``B`` bounds
every (standardized) feature in absolute value. :func:`pruning_error_bound`
evaluates that bound next to the observed deviation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _blob
from .data import TimeSeriesDataset
from .hydra import HydraConfig, HydraTransform, hydra_fit
from .quant import QuantConfig, QuantTransform, quant_fit
from .ridge import DEFAULT_LAMBDAS, RidgeModel, ridge_fit
from .trees import TreeConfig, TreeEnsemble, trees_fit

__all__ = [
    "ORIGINS",
    "METHODS",
    "ImportanceEntry",
    "SetImportance",
    "PruneDecision",
    "PrunedPipeline",
    "BoundReport",
    "n_keep",
    "mean_set_importance",
    "select_top_sets",
    "train_pipeline",
    "train_pruned",
    "pruning_error_bound",
    "sorted_tail_bound",
]

ORIGINS = ("hydra", "quant")
METHODS = ("hydra", "quant", "hydrant")


@dataclass(frozen=True)
class ImportanceEntry:
    set_id: int
    importance: float
    columns: np.ndarray = field(repr=False)
    origin: str = "hydra"

    @property
    def size(self):
        return len(self.columns)


@dataclass(frozen=True)
class SetImportance:
    entries: tuple

    def __add__(self, other):
        return SetImportance(self.entries + other.entries)

    def __len__(self):
        return len(self.entries)

    def origin(self, origin):
        return SetImportance(tuple(e for e in self.entries if e.origin == origin))

    @property
    def origins(self):
        return tuple(dict.fromkeys(e.origin for e in self.entries))

    def as_dict(self):
        return [
            {"origin": e.origin, "set": e.set_id, "importance": e.importance, "size": e.size}
            for e in self.entries
        ]


def n_keep(n_sets, zeta):
    """``clamp(round_half_up((1 - zeta) * S), 1, S)``.

    A tiny epsilon absorbs binary representation error, so that e.g.
    ``(1 - 0.3) * 5`` rounds to 4 as it would in decimal.
    """
    if not 0 <= zeta < 1:
        raise ValueError("zeta must lie in [0, 1)")
    raw = math.floor((1.0 - zeta) * n_sets + 0.5 + 1e-9)
    if raw < 1:
        warnings.warn(f"zeta={zeta} keeps no set out of {n_sets}; keeping 1", stacklevel=2)
    return max(1, min(n_sets, raw))


def mean_set_importance(beta, set_index, origin="hydra", offset=0, absolute=True):
    """Mean coefficient magnitude per feature set.

    Parameters
    ----------
    beta : ndarray of shape (q,) or (q, C)
        Coefficients of the temporary linear model.
    set_index : mapping of set id -> column indices
        Columns are relative to ``offset`` within ``beta``.
    absolute : bool
        Average ``|beta|`` (default). With ``False`` signed coefficients are
        averaged instead, which lets opposite signs cancel.
    """
    beta = np.asarray(beta, dtype=np.float64)
    if beta.ndim == 1:
        beta = beta[:, None]
    per_feature = (np.abs(beta) if absolute else beta).mean(axis=1)
    entries = []
    for s, cols in set_index.items():
        cols = np.asarray(cols, dtype=np.int64) + offset
        if cols.size == 0:
            raise ValueError(f"feature set {s} has no columns")
        entries.append(ImportanceEntry(int(s), float(per_feature[cols].mean()), cols, origin))
    return SetImportance(tuple(entries))


@dataclass(frozen=True)
class PruneDecision:
    zeta: float
    kept: dict
    r: dict
    importance: SetImportance = field(repr=False)

    def kept_columns(self):
        cols = [e.columns for e in self.importance.entries if e.set_id in self.kept.get(e.origin, ())]
        return np.sort(np.concatenate(cols)) if cols else np.zeros(0, dtype=np.int64)

    def dropped_columns(self):
        cols = [
            e.columns for e in self.importance.entries if e.set_id not in self.kept.get(e.origin, ())
        ]
        return np.sort(np.concatenate(cols)) if cols else np.zeros(0, dtype=np.int64)


def _ranked(entries):
    # decreasing importance, lower set id first on ties
    return sorted(entries, key=lambda e: (-e.importance, e.set_id))


def select_top_sets(importance, zeta):
    """Keep the ``n_keep(S, zeta)`` most important sets of each origin."""
    kept, r = {}, {}
    for origin in importance.origins:
        entries = importance.origin(origin).entries
        r[origin] = n_keep(len(entries), zeta)
        kept[origin] = frozenset(e.set_id for e in _ranked(entries)[: r[origin]])
    return PruneDecision(zeta, kept, r, importance)


class PrunedPipeline:
    """Feature transforms plus the classifier trained on their output."""

    def __init__(self, method, hydra, quant, classifier, provenance=None, temporary=None):
        self.method = method
        self.hydra = hydra
        self.quant = quant
        self.classifier = classifier
        self.provenance = provenance or {}
        self.temporary = temporary
        # set by train_pruned: the selection and the unpruned training features
        self.decision = None
        self.train_features = None

    @property
    def transforms(self):
        return [t for t in (self.hydra, self.quant) if t is not None]

    @property
    def n_features(self):
        return sum(t.n_features for t in self.transforms)

    @property
    def n_parameters(self):
        return self.classifier.n_parameters

    def features(self, x, n_jobs=1):
        parts = [t.transform(x, n_jobs=n_jobs) for t in self.transforms]
        return np.concatenate(parts, axis=1)

    def predict(self, x, n_jobs=1):
        return self.classifier.predict(self.features(x, n_jobs=n_jobs))

    def to_bytes(self):
        parts = [t.to_bytes() if t is not None else b"" for t in (self.hydra, self.quant)]
        parts.append(self.classifier.to_bytes())
        prov = dict(self.provenance, method=self.method)
        parts.append(json.dumps(prov).encode())
        return _blob.pack_many(parts)

    @classmethod
    def from_bytes(cls, data):
        hydra_b, quant_b, clf_b, prov_b = _blob.unpack_many(data)
        kind, _, _ = _blob.unpack(clf_b)
        clf = RidgeModel.from_bytes(clf_b) if kind == "ridge" else TreeEnsemble.from_bytes(clf_b)
        prov = json.loads(prov_b)
        return cls(
            prov["method"],
            HydraTransform.from_bytes(hydra_b) if hydra_b else None,
            QuantTransform.from_bytes(quant_b) if quant_b else None,
            clf,
            prov,
        )


def _check_method(method, final):
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    final = final or ("ridge" if method == "hydra" else "trees")
    if final not in ("ridge", "trees"):
        raise ValueError(f"unknown final classifier {final!r}")
    return final


def _default_configs(seed, hydra_config, quant_config, tree_config):
    hydra_seed, tree_seed = np.random.SeedSequence(seed).generate_state(2)
    return (
        hydra_config or HydraConfig(seed=int(hydra_seed)),
        quant_config or QuantConfig(),
        tree_config or TreeConfig(seed=int(tree_seed)),
    )


def _fit_final(final, Z, y, n_classes, lambdas, tree_config, n_jobs):
    if final == "ridge":
        return ridge_fit(Z, y, lambdas, n_classes=n_classes)
    return trees_fit(Z, y, tree_config, n_classes=n_classes, n_jobs=n_jobs)


def _fit_transforms(method, d, l, hydra_config, quant_config):
    hydra = hydra_fit(hydra_config, d, l) if method in ("hydra", "hydrant") else None
    quant = quant_fit(quant_config, d, l) if method in ("quant", "hydrant") else None
    return hydra, quant


def _as_dataset(ds):
    if not isinstance(ds, TimeSeriesDataset):
        raise TypeError("expected a TimeSeriesDataset")
    return ds


def train_pipeline(
    ds_train, method="hydrant", final=None, hydra_config=None, quant_config=None,
    tree_config=None, lambdas=DEFAULT_LAMBDAS, seed=0, n_jobs=1,
):
    """Train an unpruned Hydra, Quant or Hydrant pipeline."""
    ds_train = _as_dataset(ds_train)
    final = _check_method(method, final)
    hydra_config, quant_config, tree_config = _default_configs(seed, hydra_config, quant_config, tree_config)
    hydra, quant = _fit_transforms(method, ds_train.d, ds_train.l, hydra_config, quant_config)
    pipe = PrunedPipeline(method, hydra, quant, None, {"zeta": None, "final": final})
    Z = pipe.features(ds_train, n_jobs=n_jobs)
    pipe.classifier = _fit_final(final, Z, ds_train.labels, ds_train.n_classes, lambdas, tree_config, n_jobs)
    return pipe


def train_pruned(
    ds_train, method="hydrant", zeta=0.8, final=None, hydra_config=None,
    quant_config=None, tree_config=None, lambdas=DEFAULT_LAMBDAS, seed=0,
    n_jobs=1, absolute=True,
):
    """Train and prune a pipeline.

    The steps are: full transforms, temporary ridge on the concatenation
    (Hydra columns first), per-origin importance ranking and selection,
    pruned re-transform, final fit on the reduced features.
    """
    ds_train = _as_dataset(ds_train)
    final = _check_method(method, final)
    hydra_config, quant_config, tree_config = _default_configs(seed, hydra_config, quant_config, tree_config)
    hydra, quant = _fit_transforms(method, ds_train.d, ds_train.l, hydra_config, quant_config)
    full = [(name, t) for name, t in zip(ORIGINS, (hydra, quant)) if t is not None]

    Z_full = np.concatenate([t.transform(ds_train, n_jobs=n_jobs) for _, t in full], axis=1)
    temporary = ridge_fit(Z_full, ds_train.labels, lambdas, n_classes=ds_train.n_classes)

    importance = SetImportance(())
    offset = 0
    for name, t in full:
        importance += mean_set_importance(temporary.coef, t.set_index, name, offset, absolute)
        offset += t.n_features
    decision = select_top_sets(importance, zeta)

    pruned = {name: t.prune(decision.kept[name]) for name, t in full}
    pipe = PrunedPipeline(
        method,
        pruned.get("hydra"),
        pruned.get("quant"),
        None,
        {
            "zeta": zeta,
            "final": final,
            "temporary_lambda": temporary.alpha,
            "kept": {k: sorted(v) for k, v in decision.kept.items()},
            "r": decision.r,
            "importance": importance.as_dict(),
        },
        temporary,
    )
    Z = pipe.features(ds_train, n_jobs=n_jobs)
    pipe.classifier = _fit_final(final, Z, ds_train.labels, ds_train.n_classes, lambdas, tree_config, n_jobs)
    pipe.decision = decision
    pipe.train_features = Z_full
    return pipe


@dataclass
class BoundReport:
    """Uniform pruning bound next to the observed deviation, per class.

    ``B`` is an empirical estimate of the feature sup-norm taken over the
    training features after standardization (``domain == "empirical"``).
    """

    B: float
    pruned_mass: np.ndarray
    bound: np.ndarray
    deviation: np.ndarray
    domain: str = "empirical"

    @property
    def satisfied(self):
        return bool(np.all(self.deviation <= self.bound + 1e-6 * (1.0 + self.bound)))


def _feature_bound(model, Z_train):
    return float(np.abs(model.standardize(Z_train)).max())


def probe_points(Z_train, n_points=1000, seed=0):
    """Uniform random points inside the per-feature training range."""
    Z_train = np.asarray(Z_train, dtype=np.float64)
    rng = np.random.default_rng(seed)
    lo, hi = Z_train.min(axis=0), Z_train.max(axis=0)
    return lo + rng.random((n_points, Z_train.shape[1])) * (hi - lo)


def pruning_error_bound(model, decision, Z_train, Z_eval=None, n_probes=1000, seed=0):
    """Compare the uniform bound with the score deviation of zeroed coefficients.

    ``Z_eval`` defaults to ``n_probes`` uniform points inside the training
    feature ranges, where ``|standardized feature| <= B`` holds by construction.
    """
    Z_train = np.asarray(Z_train, dtype=np.float64)
    if Z_eval is None:
        Z_eval = probe_points(Z_train, n_probes, seed)
    Z_eval = np.asarray(Z_eval, dtype=np.float64)
    if Z_eval.ndim != 2 or Z_eval.shape[1] != model.n_features:
        raise ValueError(f"evaluation set has shape {Z_eval.shape}, expected (*, {model.n_features})")
    B = _feature_bound(model, Z_train)
    dropped = decision.dropped_columns()
    mass = np.abs(model.coef[dropped]).sum(axis=0)
    pruned_coef = model.coef.copy()
    pruned_coef[dropped] = 0.0
    Zs = model.standardize(Z_eval)
    full_scores = Zs @ model.coef + model.intercept
    pruned_scores = Zs @ pruned_coef + model.intercept
    deviation = np.abs(full_scores - pruned_scores).max(axis=0) if len(Zs) else np.zeros(model.n_classes)
    return BoundReport(B, mass, B * mass, deviation)


def sorted_tail_bound(model, importance, r, Z_train=None, B=None):
    """Bound after keeping only the ``r`` most important sets.

    Returns ``B`` times the largest (over classes) absolute coefficient mass
    of the ``S - r`` least important sets.
    """
    if B is None:
        if Z_train is None:
            raise ValueError("either Z_train or B is required")
        B = _feature_bound(model, Z_train)
    ranked = _ranked(importance.entries)
    if not 0 <= r <= len(ranked):
        raise ValueError(f"r={r} outside [0, {len(ranked)}]")
    tail = ranked[r:]
    if not tail:
        return 0.0
    cols = np.concatenate([e.columns for e in tail])
    return float(B * np.abs(model.coef[cols]).sum(axis=0).max())
