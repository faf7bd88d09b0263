"""Time series dataset container, on-disk format and synthetic generators.

A dataset directory holds four files::

    meta.json    {"n": int, "d": int, "l": int, "C": int, "F": int, "name": str}
    data.f32     n*d*l little-endian float32, index ((i*d)+j)*l+t
    labels.u32   n little-endian uint32
    folds.u32    n little-endian uint32 (optional, defaults to a single fold)
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "DatasetError",
    "TimeSeriesDataset",
    "SyntheticSpec",
    "GENERATOR_KINDS",
    "load_dataset",
    "save_dataset",
    "generate_synthetic",
    "split_folds",
    "znormalize",
]

GENERATOR_KINDS = ("sinusoid-frequency", "trend-slope", "gaussian-shift")


class DatasetError(ValueError):
    """Invalid dataset content, tagged with the offending field."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True, eq=False)
class TimeSeriesDataset:
    """``n`` synchronized series of ``d`` channels and length ``l``.

    ``values`` is always stored as float32 with shape ``(n, d, l)`` so that a
    save/load roundtrip is bit-exact.
    """

    values: np.ndarray
    labels: np.ndarray
    n_classes: int
    folds: np.ndarray | None = None
    n_folds: int = 1
    name: str = "dataset"

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 3:
            raise DatasetError("values", f"expected a 3d array, got shape {values.shape}")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        folds = (
            np.zeros(len(labels), dtype=np.int64)
            if self.folds is None
            else np.asarray(self.folds, dtype=np.int64).reshape(-1)
        )
        n = values.shape[0]
        if labels.shape[0] != n:
            raise DatasetError("labels", f"{labels.shape[0]} labels for {n} instances")
        if folds.shape[0] != n:
            raise DatasetError("folds", f"{folds.shape[0]} fold ids for {n} instances")
        if self.n_classes < 1:
            raise DatasetError("C", "at least one class is required")
        if self.n_folds < 1:
            raise DatasetError("F", "at least one fold is required")
        if n and (labels.min() < 0 or labels.max() >= self.n_classes):
            raise DatasetError("labels", f"label outside [0, {self.n_classes})")
        if n and (folds.min() < 0 or folds.max() >= self.n_folds):
            raise DatasetError("folds", f"fold id outside [0, {self.n_folds})")
        if not np.isfinite(values).all():
            raise DatasetError("values", "contains NaN or Inf")
        for arr in (values, labels, folds):
            arr.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "folds", folds)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def l(self):  # noqa: E743
        return self.values.shape[2]

    def validate(self):
        """Check the invariants that only hold for a complete dataset."""
        if self.n == 0:
            raise DatasetError("n", "empty dataset")
        missing = np.setdiff1d(np.arange(self.n_classes), self.labels)
        if missing.size:
            raise DatasetError("labels", f"classes {missing.tolist()} never occur")
        return self

    def subset(self, index):
        return TimeSeriesDataset(
            self.values[index],
            self.labels[index],
            self.n_classes,
            self.folds[index],
            self.n_folds,
            self.name,
        )

    def with_values(self, values):
        return TimeSeriesDataset(
            values, self.labels, self.n_classes, self.folds, self.n_folds, self.name
        )

    def __eq__(self, other):
        if not isinstance(other, TimeSeriesDataset):
            return NotImplemented
        return (
            self.n_classes == other.n_classes
            and self.n_folds == other.n_folds
            and self.name == other.name
            and self.values.shape == other.values.shape
            and np.array_equal(self.values.view(np.uint32), other.values.view(np.uint32))
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.folds, other.folds)
        )

    __hash__ = None


def _read_raw(path, dtype, count, field_name):
    if not path.exists():
        raise DatasetError(field_name, f"missing file {path.name}")
    raw = path.read_bytes()
    expected = count * np.dtype(dtype).itemsize
    if len(raw) != expected:
        raise DatasetError(
            field_name, f"{path.name} has {len(raw)} bytes, expected {expected}"
        )
    return np.frombuffer(raw, dtype=dtype)


def load_dataset(path):
    """Read a dataset directory and validate it."""
    path = Path(path)
    meta_path = path / "meta.json"
    if not meta_path.exists():
        raise DatasetError("meta", f"missing file {meta_path}")
    meta = json.loads(meta_path.read_text())
    for key in ("n", "d", "l", "C"):
        if key not in meta:
            raise DatasetError("meta", f"missing key {key!r}")
    n, d, l, n_classes = (int(meta[k]) for k in ("n", "d", "l", "C"))
    values = _read_raw(path / "data.f32", "<f4", n * d * l, "values")
    labels = _read_raw(path / "labels.u32", "<u4", n, "labels")
    if (path / "folds.u32").exists():
        folds = _read_raw(path / "folds.u32", "<u4", n, "folds")
        n_folds = int(meta.get("F", int(folds.max()) + 1 if n else 1))
    else:
        folds, n_folds = None, int(meta.get("F", 1))
    if n and labels.max() >= n_classes:
        raise DatasetError("labels", f"label {int(labels.max())} >= C={n_classes}")
    ds = TimeSeriesDataset(
        values.reshape(n, d, l).astype(np.float32),
        labels.astype(np.int64),
        n_classes,
        None if folds is None else folds.astype(np.int64),
        n_folds,
        str(meta.get("name", path.name)),
    )
    return ds.validate()


def save_dataset(ds, path):
    """Write ``ds`` to directory ``path`` (created if needed)."""
    if ds.n == 0:
        raise DatasetError("n", "refusing to save an empty dataset")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {"n": ds.n, "d": ds.d, "l": ds.l, "C": ds.n_classes, "F": ds.n_folds, "name": ds.name}
    (path / "meta.json").write_text(json.dumps(meta, indent=2))
    (path / "data.f32").write_bytes(ds.values.astype("<f4").tobytes())
    (path / "labels.u32").write_bytes(ds.labels.astype("<u4").tobytes())
    (path / "folds.u32").write_bytes(ds.folds.astype("<u4").tobytes())


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a synthetic classification problem."""

    n: int
    d: int
    l: int
    n_classes: int
    kind: str = "sinusoid-frequency"
    noise: float = 0.1
    seed: int = 0
    n_folds: int = 5
    name: str | None = field(default=None)

    def __post_init__(self):
        if self.kind not in GENERATOR_KINDS:
            raise ValueError(f"unknown generator kind {self.kind!r}")
        if self.n < self.n_classes:
            raise ValueError(f"n={self.n} < C={self.n_classes}")
        if self.l < 8:
            raise ValueError("series length must be >= 8")
        if self.d < 1 or self.n_classes < 1 or self.n_folds < 1:
            raise ValueError("d, C and F must be positive")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def _class_signal(kind, k, n_classes, t, rng, shape):
    # t is in [0, 1); shape is (m, d) for m instances of class k
    if kind == "sinusoid-frequency":
        cycles = 2.0 + 2.0 * k
        phase = rng.uniform(0.0, 2 * np.pi, size=shape + (1,))
        return np.sin(2 * np.pi * cycles * t + phase)
    if kind == "trend-slope":
        slope = 4.0 * (k / max(n_classes - 1, 1) - 0.5) if n_classes > 1 else 1.0
        offset = rng.uniform(-1.0, 1.0, size=shape + (1,))
        return slope * (t - 0.5) + offset
    width = 0.05
    center = (k + 1) / (n_classes + 1) + rng.normal(0.0, width / 4, size=shape + (1,))
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def generate_synthetic(spec):
    """Draw a balanced, fold-stratified dataset described by ``spec``."""
    rng = np.random.default_rng(spec.seed)
    n, d, l, n_classes = spec.n, spec.d, spec.l, spec.n_classes
    labels = rng.permutation(np.arange(n) % n_classes)
    folds = np.empty(n, dtype=np.int64)
    values = np.empty((n, d, l))
    t = np.arange(l) / l
    for k in range(n_classes):
        members = np.flatnonzero(labels == k)
        folds[members] = np.arange(members.size) % spec.n_folds
        values[members] = _class_signal(spec.kind, k, n_classes, t, rng, (members.size, d))
    if spec.noise > 0:
        values += rng.normal(0.0, spec.noise, size=values.shape)
    name = spec.name or f"{spec.kind}-{spec.seed}"
    return TimeSeriesDataset(values, labels, n_classes, folds, spec.n_folds, name).validate()


def split_folds(ds, fold_id):
    """Hold out fold ``fold_id`` as the test split."""
    if ds.n_folds < 2:
        raise DatasetError("folds", "a single fold leaves no held-out data")
    if not 0 <= fold_id < ds.n_folds:
        raise DatasetError("folds", f"fold id {fold_id} outside [0, {ds.n_folds})")
    test_mask = ds.folds == fold_id
    if not test_mask.any() or test_mask.all():
        raise DatasetError("folds", f"fold {fold_id} yields an empty split")
    train, test = ds.subset(~test_mask), ds.subset(test_mask)
    missing = np.setdiff1d(np.arange(ds.n_classes), train.labels)
    if missing.size:
        raise DatasetError(
            "labels", f"fold {fold_id} leaves classes {missing.tolist()} absent from train"
        )
    return train, test


def znormalize(values, eps=1e-8):
    """Per-instance, per-channel z-normalization along time."""
    values = np.asarray(values, dtype=np.float64)
    mean = values.mean(axis=-1, keepdims=True)
    std = values.std(axis=-1, keepdims=True)
    return (values - mean) / np.where(std < eps, 1.0, std)
