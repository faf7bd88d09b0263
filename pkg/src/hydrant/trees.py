"""Ensemble of extremely randomized decision trees.

Trees are grown on the full training set (no bootstrap). At every node a
fixed number of non-constant candidate features is drawn uniformly, each gets
uniform random thresholds in its observed node range, and the candidate with
the best gini gain is used. Nodes are split until pure or too small.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from . import _blob
from ._parallel import parallel_map

__all__ = ["TreeConfig", "Tree", "TreeEnsemble", "trees_fit", "trees_predict_proba", "trees_predict"]


@dataclass(frozen=True)
class TreeConfig:
    n_trees: int = 100
    # None -> ceil(sqrt(q))
    candidate_features: int | None = None
    n_thresholds: int = 1
    min_samples_leaf: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.candidate_features is not None and self.candidate_features < 1:
            raise ValueError("candidate_features must be >= 1")
        if self.n_thresholds < 1 or self.min_samples_leaf < 1:
            raise ValueError("n_thresholds and min_samples_leaf must be >= 1")


@dataclass(eq=False)
class Tree:
    """Nodes in preorder; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    def apply(self, Z):
        node = np.zeros(len(Z), dtype=np.int64)
        rows = np.arange(len(Z))
        while True:
            feat = self.feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            go_left = Z[rows, np.maximum(feat, 0)] <= self.threshold[node]
            node = np.where(inner, np.where(go_left, self.left[node], self.right[node]), node)

    def predict_proba(self, Z):
        return self.value[self.apply(np.asarray(Z, dtype=np.float64))]


def _grow_tree(Z, Y1h, n_candidates, n_thresholds, min_leaf, rng):
    n, q = Z.shape
    feature, threshold, left, right, value = [], [], [], [], []
    # (sample indices, parent node id, is_left_child)
    stack = [(np.arange(n), -1, False)]
    while stack:
        idx, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        counts = Y1h[idx].sum(axis=0)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts / counts.sum())
        if np.count_nonzero(counts) < 2 or len(idx) < 2 * min_leaf:
            continue
        split = _best_split(Z, Y1h, idx, counts, n_candidates, n_thresholds, min_leaf, rng)
        if split is None:
            continue
        feat, thr, mask = split
        feature[node], threshold[node] = feat, thr
        stack.append((idx[~mask], node, False))
        stack.append((idx[mask], node, True))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


def _best_split(Z, Y1h, idx, counts, n_candidates, n_thresholds, min_leaf, rng):
    q = Z.shape[1]
    order = rng.permutation(q)
    chosen, lo, hi = [], [], []
    pos = 0
    # draw features in random order until enough non-constant ones are found
    while len(chosen) < n_candidates and pos < q:
        block = order[pos : pos + 2 * (n_candidates - len(chosen))]
        pos += len(block)
        sub = Z[np.ix_(idx, block)]
        mn, mx = sub.min(axis=0), sub.max(axis=0)
        ok = np.flatnonzero(mx > mn)[: n_candidates - len(chosen)]
        chosen.extend(block[ok])
        lo.extend(mn[ok])
        hi.extend(mx[ok])
    if not chosen:
        return None
    feats = np.repeat(np.array(chosen), n_thresholds)
    lo = np.repeat(np.array(lo), n_thresholds)
    hi = np.repeat(np.array(hi), n_thresholds)
    thr = lo + rng.random(len(feats)) * (hi - lo)
    thr = np.where(thr >= hi, lo, thr)
    go_left = Z[np.ix_(idx, feats)] <= thr
    n_left = go_left.sum(axis=0).astype(np.float64)
    n_right = len(idx) - n_left
    left_counts = go_left.T.astype(np.float64) @ Y1h[idx]
    right_counts = counts[None, :] - left_counts
    valid = (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    # maximizing this is equivalent to minimizing weighted child gini
    with np.errstate(divide="ignore", invalid="ignore"):
        purity = (left_counts**2).sum(axis=1) / n_left + (right_counts**2).sum(axis=1) / n_right
    purity = np.where(valid, purity, -np.inf)
    best = int(np.argmax(purity))
    return int(feats[best]), float(thr[best]), go_left[:, best]


class TreeEnsemble:
    """Unweighted probability average over ``M`` trees."""

    def __init__(self, trees, n_classes, n_features, config):
        self.trees = list(trees)
        self.n_classes = int(n_classes)
        self.n_features = int(n_features)
        self.config = config
        self._pack()

    def _pack(self):
        sizes = np.array([t.n_nodes for t in self.trees])
        self._roots = np.concatenate([[0], np.cumsum(sizes)[:-1]])
        shift = [np.where(t.left >= 0, t.left + r, -1) for t, r in zip(self.trees, self._roots)]
        shift_r = [np.where(t.right >= 0, t.right + r, -1) for t, r in zip(self.trees, self._roots)]
        self._feature = np.concatenate([t.feature for t in self.trees])
        self._threshold = np.concatenate([t.threshold for t in self.trees])
        self._left = np.concatenate(shift)
        self._right = np.concatenate(shift_r)
        self._value = np.concatenate([t.value for t in self.trees])

    @property
    def n_trees(self):
        return len(self.trees)

    @property
    def n_parameters(self):
        # split: feature + threshold, leaf: class distribution
        return int(sum(2 * (t.feature >= 0).sum() + self.n_classes * (t.feature < 0).sum() for t in self.trees))

    def apply(self, Z):
        Z = np.asarray(Z, dtype=np.float64)
        if Z.ndim != 2 or Z.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} feature columns, got shape {Z.shape}")
        node = np.broadcast_to(self._roots, (len(Z), self.n_trees)).copy()
        rows = np.arange(len(Z))[:, None]
        while True:
            feat = self._feature[node]
            inner = feat >= 0
            if not inner.any():
                return node
            go_left = Z[rows, np.maximum(feat, 0)] <= self._threshold[node]
            node = np.where(inner, np.where(go_left, self._left[node], self._right[node]), node)

    def predict_proba(self, Z):
        return self._value[self.apply(Z)].mean(axis=1)

    def predict(self, Z):
        return np.argmax(self.predict_proba(Z), axis=1)

    def to_bytes(self):
        sizes = np.array([t.n_nodes for t in self.trees], dtype=np.int64)
        arrays = {
            "sizes": sizes,
            "feature": np.concatenate([t.feature for t in self.trees]),
            "threshold": np.concatenate([t.threshold for t in self.trees]),
            "left": np.concatenate([t.left for t in self.trees]),
            "right": np.concatenate([t.right for t in self.trees]),
            "value": np.concatenate([t.value for t in self.trees]),
        }
        meta = {"n_classes": self.n_classes, "n_features": self.n_features, "config": asdict(self.config)}
        return _blob.pack("trees", meta, arrays)

    @classmethod
    def from_bytes(cls, blob):
        _, meta, a = _blob.unpack(blob, "trees")
        bounds = np.concatenate([[0], np.cumsum(a["sizes"])])
        trees = [
            Tree(*(a[k][s:e] for k in ("feature", "threshold", "left", "right", "value")))
            for s, e in zip(bounds[:-1], bounds[1:])
        ]
        return cls(trees, meta["n_classes"], meta["n_features"], TreeConfig(**meta["config"]))


def trees_fit(Z, y, config=TreeConfig(), n_classes=None, n_jobs=1):
    """Grow ``config.n_trees`` trees; per-tree seeds are spawned from ``config.seed``."""
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if Z.ndim != 2 or Z.shape[0] != y.shape[0]:
        raise ValueError("Z must be (n, q) with one label per row")
    if Z.shape[0] < 2:
        raise ValueError("trees need at least two instances")
    if np.unique(y).size < 2:
        raise ValueError("trees need at least two distinct classes")
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    q = Z.shape[1]
    n_candidates = config.candidate_features or math.ceil(math.sqrt(q))
    n_candidates = min(n_candidates, q)
    Y1h = np.eye(n_classes)[y]
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = parallel_map(
        lambda ss: _grow_tree(
            Z, Y1h, n_candidates, config.n_thresholds, config.min_samples_leaf,
            np.random.default_rng(ss),
        ),
        seeds,
        n_jobs,
    )
    return TreeEnsemble(trees, n_classes, q, config)


def trees_predict_proba(ensemble, Z):
    return ensemble.predict_proba(Z)


def trees_predict(ensemble, Z):
    return ensemble.predict(Z)
