"""Hydra: competing groups of random dilated convolution kernels.

For every (group, dilation) pair the ``k`` kernels of the group are convolved
with the input and compete at each timepoint. The feature set of the pair
holds, per kernel, how often it gave the largest response (hard-max count),
the sum of its responses at those timepoints (soft-max sum) and how often it
gave the smallest response (hard-min count).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from numba import njit

from . import _blob
from ._parallel import chunked_map
from .data import TimeSeriesDataset

__all__ = ["HydraConfig", "HydraTransform", "hydra_fit", "hydra_transform", "hydra_prune"]


@dataclass(frozen=True)
class HydraConfig:
    n_groups: int = 64
    n_kernels: int = 8
    kernel_length: int = 9
    seed: int = 0
    max_dilation_exponent: int | None = None
    max_channels: int = 8

    def __post_init__(self):
        if self.n_groups < 1:
            raise ValueError("n_groups must be >= 1")
        if self.n_kernels < 2:
            raise ValueError("n_kernels must be >= 2 for kernels to compete")
        if self.kernel_length < 3 or self.kernel_length % 2 == 0:
            raise ValueError("kernel_length must be odd and >= 3")
        if self.max_channels < 1:
            raise ValueError("max_channels must be >= 1")


def _as_values(x):
    if isinstance(x, TimeSeriesDataset):
        x = x.values
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, None, :]
    if x.ndim != 3:
        raise ValueError(f"expected (n, d, l) input, got shape {x.shape}")
    return x


@njit(cache=True, nogil=True)
def _competition_counts(xp, weights, dilation, length, out):
    # xp: (n, G, length + 2 * pad) zero-padded input, weights: (G, k, m)
    # out: (n, G, 3k) receives hard-max counts, soft-max sums, hard-min counts
    n, n_groups = xp.shape[0], xp.shape[1]
    k, m = weights.shape[1], weights.shape[2]
    resp = np.empty((k, length))
    best = np.empty(length)
    worst = np.empty(length)
    i_best = np.empty(length, dtype=np.int64)
    i_worst = np.empty(length, dtype=np.int64)
    for i in range(n):
        for g in range(n_groups):
            resp[:] = 0.0
            for a in range(m):
                off = a * dilation
                for j in range(k):
                    w = weights[g, j, a]
                    for t in range(length):
                        resp[j, t] += w * xp[i, g, off + t]
            for t in range(length):
                best[t] = resp[0, t]
                worst[t] = resp[0, t]
                i_best[t] = 0
                i_worst[t] = 0
            # strict comparisons keep the lowest kernel index on ties
            for j in range(1, k):
                for t in range(length):
                    r = resp[j, t]
                    up = r > best[t]
                    down = r < worst[t]
                    best[t] = r if up else best[t]
                    i_best[t] = j if up else i_best[t]
                    worst[t] = r if down else worst[t]
                    i_worst[t] = j if down else i_worst[t]
            for t in range(length):
                out[i, g, i_best[t]] += 1.0
                out[i, g, k + i_best[t]] += best[t]
                out[i, g, 2 * k + i_worst[t]] += 1.0


class HydraTransform:
    """Fitted (and possibly pruned) Hydra feature transform.

    Feature set ``s = dilation_index * n_groups + group``; each set produces
    ``3 * n_kernels`` contiguous columns. Output columns follow the kept sets
    in ascending id.
    """

    def __init__(self, config, n_channels, length, weights, dilations, channels, kept=None):
        self.config = config
        self.n_channels = int(n_channels)
        self.length = int(length)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.dilations = np.asarray(dilations, dtype=np.int64)
        self.channels = np.asarray(channels, dtype=np.int64)
        n_total = len(self.dilations) * config.n_groups
        self.kept = np.arange(n_total) if kept is None else np.unique(np.asarray(kept, dtype=np.int64))

    @property
    def n_sets_total(self):
        return len(self.dilations) * self.config.n_groups

    @property
    def n_sets(self):
        return len(self.kept)

    @property
    def set_size(self):
        return 3 * self.config.n_kernels

    @property
    def n_features(self):
        return self.n_sets * self.set_size

    @property
    def set_index(self):
        """Map kept set id to its output column indices."""
        w = self.set_size
        return {int(s): np.arange(i * w, (i + 1) * w) for i, s in enumerate(self.kept)}

    def _groups_by_dilation(self):
        g = self.config.n_groups
        out = []
        for di in range(len(self.dilations)):
            groups = self.kept[(self.kept >= di * g) & (self.kept < (di + 1) * g)] - di * g
            if groups.size:
                out.append((di, groups))
        return out

    def _transform_chunk(self, x, plan):
        k, length = self.config.n_kernels, self.config.kernel_length
        n, l = x.shape[0], self.length
        used = np.unique(np.concatenate([groups for _, groups in plan]))
        # responses are linear, so summing a group's channels first is equivalent
        # to summing the per-channel responses
        summed = {}
        sel = self.channels[used]
        acc = x[:, sel[:, 0], :].copy()
        for c in range(1, sel.shape[1]):
            acc += x[:, sel[:, c], :]
        for j, grp in enumerate(used):
            summed[int(grp)] = acc[:, j, :]
        blocks = []
        for di, groups in plan:
            dil = int(self.dilations[di])
            pad = (length - 1) * dil // 2
            xg = np.stack([summed[int(grp)] for grp in groups], axis=1)
            xp = np.ascontiguousarray(np.pad(xg, ((0, 0), (0, 0), (pad, pad))))
            block = np.zeros((n, len(groups), 3 * k))
            _competition_counts(xp, np.ascontiguousarray(self.weights[groups]), dil, l, block)
            blocks.append(block.reshape(n, -1))
        return np.concatenate(blocks, axis=1)

    def transform(self, x, n_jobs=1, chunk_size=32):
        x = _as_values(x)
        if x.shape[1:] != (self.n_channels, self.length):
            raise ValueError(
                f"input shape {x.shape[1:]} does not match fitted "
                f"{(self.n_channels, self.length)}"
            )
        plan = self._groups_by_dilation()
        if x.shape[0] == 0:
            return np.zeros((0, self.n_features))
        parts = chunked_map(
            lambda a, b: self._transform_chunk(x[a:b], plan), x.shape[0], chunk_size, n_jobs
        )
        return np.concatenate(parts, axis=0)

    def prune(self, keep):
        keep = np.unique(np.asarray(sorted(keep), dtype=np.int64))
        if keep.size == 0:
            raise ValueError("keep set is empty")
        if not np.isin(keep, self.kept).all():
            raise ValueError("keep contains set ids not present in this transform")
        return HydraTransform(
            self.config, self.n_channels, self.length, self.weights,
            self.dilations, self.channels, keep,
        )

    def to_bytes(self):
        meta = {"config": asdict(self.config), "d": self.n_channels, "l": self.length}
        arrays = {
            "weights": self.weights,
            "dilations": self.dilations,
            "channels": self.channels,
            "kept": self.kept,
        }
        return _blob.pack("hydra", meta, arrays)

    @classmethod
    def from_bytes(cls, blob):
        _, meta, arrays = _blob.unpack(blob, "hydra")
        return cls(
            HydraConfig(**meta["config"]), meta["d"], meta["l"], arrays["weights"],
            arrays["dilations"], arrays["channels"], arrays["kept"],
        )

    def __repr__(self):
        return (
            f"HydraTransform(groups={self.config.n_groups}, k={self.config.n_kernels}, "
            f"dilations={self.dilations.tolist()}, sets={self.n_sets}/{self.n_sets_total})"
        )


def hydra_fit(config, n_channels, length):
    """Draw kernels, dilations and channel assignments for ``(d, l)`` input."""
    if length < config.kernel_length:
        raise ValueError(f"series length {length} < kernel length {config.kernel_length}")
    rng = np.random.default_rng(config.seed)
    g, k, length_k = config.n_groups, config.n_kernels, config.kernel_length
    dilations = []
    e = 0
    while (length_k - 1) * 2**e + 1 <= length:
        if config.max_dilation_exponent is not None and e > config.max_dilation_exponent:
            break
        dilations.append(2**e)
        e += 1
    weights = rng.standard_normal((g, k, length_k))
    weights -= weights.mean(axis=-1, keepdims=True)
    n_sel = min(n_channels, config.max_channels)
    channels = np.stack(
        [np.sort(rng.choice(n_channels, size=n_sel, replace=False)) for _ in range(g)]
    )
    return HydraTransform(config, n_channels, length, weights, dilations, channels)


def hydra_transform(transform, x, n_jobs=1):
    return transform.transform(x, n_jobs=n_jobs)


def hydra_prune(transform, keep):
    return transform.prune(keep)
