"""Experiment driver: train, evaluate and time pipelines over folds and batch sizes."""

from __future__ import annotations

import fcntl
import json
import logging
import uuid
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..data import DatasetError, load_dataset, split_folds, znormalize
from ..hydra import HydraConfig
from ..pruning import METHODS, train_pipeline, train_pruned
from ..quant import QuantConfig
from ..strep import QUALITY_METRICS, MeasurementRecord, quality_metrics
from ..trees import TreeConfig
from .energy import DEFAULT_POWER_W, EnergyMeter, measure

__all__ = [
    "SCHEMA_VERSION",
    "BATCH_SIZES",
    "RunConfig",
    "RunResult",
    "ExperimentResult",
    "run_experiment",
    "sweep_prune_rates",
    "sweep_batch_sizes",
    "append_results",
    "read_results",
    "results_to_records",
    "model_id",
]

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
BATCH_SIZES = tuple(2**e for e in range(4, 15))
DEFAULT_ZETA = 0.8


@dataclass
class RunConfig:
    dataset: str
    method: str = "hydrant"
    pruned: bool = False
    zeta: float | None = None
    # None runs every fold
    fold: int | None = None
    batch_sizes: tuple = (2**4, 2**8)
    repeats: int = 5
    seed: int = 0
    env: str = "local"
    normalize: bool = False
    energy_backend: str = "proxy"
    power_w: float = DEFAULT_POWER_W
    counter_path: str | None = None
    results: str | None = None
    parallel: bool = False
    n_jobs: int = 1
    final: str | None = None
    hydra: dict = field(default_factory=dict)
    quant: dict = field(default_factory=dict)
    trees: dict = field(default_factory=dict)
    run_id: str | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not self.pruned and self.zeta is not None:
            raise ValueError("zeta given for an unpruned method; set pruned=true")
        if self.pruned and self.zeta is None:
            self.zeta = DEFAULT_ZETA
        if self.zeta is not None and not 0 <= self.zeta < 1:
            raise ValueError("zeta must lie in [0, 1)")
        self.batch_sizes = tuple(int(b) for b in self.batch_sizes)
        if not self.batch_sizes:
            raise ValueError("at least one batch size is required")
        bad = [b for b in self.batch_sizes if b not in BATCH_SIZES]
        if bad:
            raise ValueError(f"batch sizes {bad} are not powers of two in [2^4, 2^14]")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if self.final not in (None, "ridge", "trees"):
            raise ValueError(f"unknown final classifier {self.final!r}")

    @classmethod
    def from_dict(cls, obj):
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def from_json(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self):
        out = asdict(self)
        out["batch_sizes"] = list(self.batch_sizes)
        return out


@dataclass
class RunResult:
    fold: int
    metrics: dict
    train_s: float
    train_j: float
    # batch size -> (seconds per sample, joules per sample), medians over repeats
    inference: dict
    optimal_batch: int
    n_features: int
    n_parameters: int
    n_test: int
    predictions: np.ndarray = field(repr=False)
    notes: list = field(default_factory=list)

    @property
    def infer_s_per_sample(self):
        return self.inference[self.optimal_batch][0]

    @property
    def infer_j_per_sample(self):
        return self.inference[self.optimal_batch][1]


@dataclass
class ExperimentResult:
    config: RunConfig
    run_id: str
    folds: list
    summary: dict
    records: list
    errors: dict = field(default_factory=dict)


def model_id(method, pruned, zeta):
    return f"P{round(zeta * 100)}{method}" if pruned else method


def _infer(pipeline, values, batch, n_jobs):
    out = []
    for start in range(0, len(values), batch):
        out.append(pipeline.predict(values[start : start + batch], n_jobs=n_jobs))
    return np.concatenate(out)


def _optimal(inference):
    # lowest energy, smaller batch on ties
    return min(inference, key=lambda b: (inference[b][1], b))


def _train(cfg, train_ds, n_jobs):
    hydra = HydraConfig(**cfg.hydra) if cfg.hydra else None
    quant = QuantConfig(**cfg.quant) if cfg.quant else None
    trees = TreeConfig(**cfg.trees) if cfg.trees else None
    kwargs = dict(
        method=cfg.method, final=cfg.final, hydra_config=hydra, quant_config=quant,
        tree_config=trees, seed=cfg.seed, n_jobs=n_jobs,
    )
    if cfg.pruned:
        return train_pruned(train_ds, zeta=cfg.zeta, **kwargs)
    return train_pipeline(train_ds, **kwargs)


def _run_fold(cfg, ds, fold, meter):
    n_jobs = cfg.n_jobs if cfg.parallel else 1
    train_ds, test_ds = split_folds(ds, fold)
    if cfg.normalize:
        train_ds = train_ds.with_values(znormalize(train_ds.values))
        test_ds = test_ds.with_values(znormalize(test_ds.values))
    holder = {}
    train_s, train_j = measure(meter, lambda: holder.update(p=_train(cfg, train_ds, n_jobs)))
    pipeline = holder["p"]
    values = test_ds.values.astype(np.float64)
    predictions = _infer(pipeline, values, len(values), n_jobs)
    metrics = quality_metrics(test_ds.labels, predictions, labels=np.arange(ds.n_classes))
    notes = []
    inference = {}
    for batch in cfg.batch_sizes:
        used = min(batch, len(values))
        if used < batch:
            notes.append(f"batch {batch} clipped to test size {used}")
        samples = []
        for _ in range(cfg.repeats):
            s, j = measure(meter, lambda: _infer(pipeline, values, used, n_jobs))
            samples.append((s / len(values), j / len(values)))
        samples = np.array(samples)
        inference[batch] = (float(np.median(samples[:, 0])), float(np.median(samples[:, 1])))
    return RunResult(
        fold, metrics, train_s, train_j, inference, _optimal(inference),
        pipeline.n_features, pipeline.n_parameters, len(values), predictions, notes,
    )


def run_experiment(cfg):
    """Run ``cfg`` on each requested fold and append JSONL results if configured."""
    ds = load_dataset(cfg.dataset)
    meter = EnergyMeter(cfg.energy_backend, cfg.power_w, cfg.counter_path)
    run_id = cfg.run_id or uuid.uuid4().hex[:12]
    folds = range(ds.n_folds) if cfg.fold is None else [cfg.fold]
    results, errors = [], {}
    for fold in folds:
        try:
            results.append(_run_fold(cfg, ds, fold, meter))
        except (DatasetError, ValueError) as exc:
            log.warning("fold %s skipped: %s", fold, exc)
            errors[fold] = str(exc)
    summary = _summarize(results)
    summary["warnings"] = list(meter.warnings)
    model = model_id(cfg.method, cfg.pruned, cfg.zeta or 0.0)
    config_id = f"{ds.name}|{cfg.env}"
    records = []
    if results:
        for prop in QUALITY_METRICS:
            records.append(MeasurementRecord(model, config_id, prop, summary["metrics"][prop]))
        records.append(MeasurementRecord(model, config_id, "infer_s_per_sample", summary["infer_s_per_sample"]))
        records.append(MeasurementRecord(model, config_id, "infer_j_per_sample", summary["infer_j_per_sample"]))
    exp = ExperimentResult(cfg, run_id, results, summary, records, errors)
    if cfg.results:
        append_results(cfg.results, _result_lines(exp, ds.name, meter.backend))
    return exp


def _summarize(results):
    if not results:
        return {"metrics": {}, "n_folds": 0}
    return {
        "metrics": {k: float(np.mean([r.metrics[k] for r in results])) for k in results[0].metrics},
        "train_s": float(np.mean([r.train_s for r in results])),
        "train_j": float(np.mean([r.train_j for r in results])),
        "infer_s_per_sample": float(np.mean([r.infer_s_per_sample for r in results])),
        "infer_j_per_sample": float(np.mean([r.infer_j_per_sample for r in results])),
        "n_features": float(np.mean([r.n_features for r in results])),
        "n_folds": len(results),
    }


def _result_lines(exp, dataset_name, backend):
    cfg = exp.config
    base = {
        "schema": SCHEMA_VERSION,
        "run_id": exp.run_id,
        "dataset": dataset_name,
        "method": cfg.method,
        "model": model_id(cfg.method, cfg.pruned, cfg.zeta or 0.0),
        "zeta": float(cfg.zeta or 0.0),
        "energy_backend": backend,
        "env": cfg.env,
        "seed": cfg.seed,
    }
    lines = []
    for r in exp.folds:
        for batch, (s, j) in r.inference.items():
            lines.append(dict(
                base, record="batch", fold=r.fold, batch=batch, metrics=r.metrics,
                train_s=r.train_s, train_j=r.train_j, infer_s_per_sample=s,
                infer_j_per_sample=j, optimal=batch == r.optimal_batch,
                n_features=r.n_features, n_parameters=r.n_parameters,
            ))
    if exp.folds:
        s = exp.summary
        lines.append(dict(
            base, record="summary", fold=-1, batch=-1, metrics=s["metrics"],
            train_s=s["train_s"], train_j=s["train_j"],
            infer_s_per_sample=s["infer_s_per_sample"], infer_j_per_sample=s["infer_j_per_sample"],
            n_folds=s["n_folds"], warnings=s["warnings"],
        ))
    return lines


def append_results(path, lines):
    """Append JSON lines under an exclusive lock; existing lines are never touched."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a") as fh:
        fcntl.flock(fh, fcntl.LOCK_EX)
        try:
            for line in lines:
                fh.write(json.dumps(line) + "\n")
        finally:
            fcntl.flock(fh, fcntl.LOCK_UN)


def read_results(path):
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def results_to_records(lines):
    """Measurement records from result summaries (or plain measurement lines)."""
    records = []
    for obj in lines:
        if "property" in obj:
            records.append(MeasurementRecord(obj["model"], obj["config"], obj["property"], float(obj["value"])))
            continue
        if obj.get("record") != "summary":
            continue
        config = f"{obj['dataset']}|{obj['env']}"
        for prop, value in obj["metrics"].items():
            records.append(MeasurementRecord(obj["model"], config, prop, float(value)))
        for prop in ("infer_s_per_sample", "infer_j_per_sample"):
            records.append(MeasurementRecord(obj["model"], config, prop, float(obj[prop])))
    return records


def sweep_prune_rates(base, rates, datasets=None):
    """One experiment per (dataset, rate); rows plus one cross-dataset mean per rate."""
    rates = list(rates)
    if any(not 0 <= r <= 0.9 for r in rates):
        raise ValueError("prune rates must lie in [0, 0.9]")
    datasets = list(datasets) if datasets else [base.dataset]
    rows = []
    for path in datasets:
        for rate in rates:
            cfg = RunConfig.from_dict(dict(base.to_dict(), dataset=str(path), pruned=True, zeta=rate))
            exp = run_experiment(cfg)
            rows.append({
                "dataset": load_dataset(path).name,
                "rate": rate,
                "accuracy": exp.summary["metrics"].get("accuracy", float("nan")),
                "infer_j_per_sample": exp.summary.get("infer_j_per_sample", float("nan")),
                "infer_s_per_sample": exp.summary.get("infer_s_per_sample", float("nan")),
                "n_features": exp.summary.get("n_features", float("nan")),
            })
    for rate in rates:
        sel = [r for r in rows if r["rate"] == rate and r["dataset"] != "mean"]
        rows.append({
            "dataset": "mean",
            "rate": rate,
            **{k: float(np.mean([r[k] for r in sel])) for k in ("accuracy", "infer_j_per_sample", "infer_s_per_sample", "n_features")},
        })
    return rows


def sweep_batch_sizes(cfg):
    """Per-sample time/energy per batch size, averaged over folds, with the optimum."""
    if len(cfg.batch_sizes) < 2:
        log.info("single batch size: it is optimal by definition")
    exp = run_experiment(cfg)
    if not exp.folds:
        raise ValueError(f"no fold succeeded: {exp.errors}")
    table = {}
    for b in cfg.batch_sizes:
        table[b] = (
            float(np.mean([r.inference[b][0] for r in exp.folds])),
            float(np.mean([r.inference[b][1] for r in exp.folds])),
        )
    best = _optimal(table)
    rows = [
        {
            "batch": b,
            "infer_s_per_sample": s,
            "infer_j_per_sample": j,
            "overhead_pct": (j / table[best][1] - 1.0) * 100.0 if table[best][1] > 0 else 0.0,
            "optimal": b == best,
        }
        for b, (s, j) in table.items()
    ]
    notes = sorted({n for r in exp.folds for n in r.notes})
    return rows, best, notes
