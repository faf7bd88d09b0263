"""Quant: quantiles over dyadic intervals of several series representations.

Each row of the interval table ``(representation, channel, start, end)`` is
one feature set. A row yields ``m = max(1, (end - start) // divisor)``
quantiles at probabilities ``(j + 0.5) / m``; the interval mean is subtracted
from every odd-indexed quantile.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import _blob
from ._parallel import chunked_map
from .hydra import _as_values

__all__ = [
    "REPRESENTATIONS",
    "QuantConfig",
    "QuantTransform",
    "quant_fit",
    "quant_transform",
    "quant_prune",
    "representation_length",
    "interpolated_quantiles",
]

REPRESENTATIONS = ("identity", "first-difference", "second-difference", "fourier-magnitude")
DEFAULT_DEPTH = 6


@dataclass(frozen=True)
class QuantConfig:
    # None means DEFAULT_DEPTH, capped so that every interval spans >= 2 points
    depth: int | None = None
    divisor: int = 4
    representations: tuple = REPRESENTATIONS

    def __post_init__(self):
        object.__setattr__(self, "representations", tuple(self.representations))
        if self.depth is not None and self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.divisor < 1:
            raise ValueError("divisor must be >= 1")
        if not self.representations:
            raise ValueError("at least one representation is required")
        unknown = set(self.representations) - set(REPRESENTATIONS)
        if unknown:
            raise ValueError(f"unknown representations {sorted(unknown)}")
        if len(set(self.representations)) != len(self.representations):
            raise ValueError("duplicate representations")


def representation_length(rep, length):
    return {
        "identity": length,
        "first-difference": length - 1,
        "second-difference": length - 2,
        "fourier-magnitude": length // 2 + 1,
    }[rep]


def _represent(rep, x):
    if rep == "identity":
        return x
    if rep == "first-difference":
        return np.diff(x, n=1, axis=-1)
    if rep == "second-difference":
        return np.diff(x, n=2, axis=-1)
    return np.abs(np.fft.rfft(x, axis=-1))


def interpolated_quantiles(segment, m):
    """Quantiles of each row at ``(j + 0.5) / m`` with linear interpolation.

    Positions are ``p * (len - 1)`` into the sorted row, matching the
    'linear' convention.
    """
    srt = np.sort(segment, axis=-1)
    pos = (np.arange(m) + 0.5) / m * (srt.shape[-1] - 1)
    lo = np.floor(pos).astype(np.int64)
    hi = np.minimum(lo + 1, srt.shape[-1] - 1)
    frac = pos - lo
    a, b = srt[:, lo], srt[:, hi]
    return a + (b - a) * frac


class QuantTransform:
    """Fitted (and possibly pruned) Quant transform.

    ``table`` has one row ``(rep_index, channel, start, end)`` per feature set
    of the full transform; set ids are row indices.
    """

    def __init__(self, config, n_channels, length, table, kept=None):
        self.config = config
        self.n_channels = int(n_channels)
        self.length = int(length)
        self.table = np.asarray(table, dtype=np.int64).reshape(-1, 4)
        self.kept = (
            np.arange(len(self.table))
            if kept is None
            else np.unique(np.asarray(kept, dtype=np.int64))
        )
        widths = self.table[:, 3] - self.table[:, 2]
        self._counts = np.maximum(1, widths // config.divisor)

    @property
    def n_sets_total(self):
        return len(self.table)

    @property
    def n_sets(self):
        return len(self.kept)

    def set_sizes(self):
        return self._counts[self.kept]

    @property
    def n_features(self):
        return int(self.set_sizes().sum())

    @property
    def set_index(self):
        """Map kept set id to its output column indices."""
        stops = np.cumsum(self.set_sizes())
        starts = stops - self.set_sizes()
        return {int(s): np.arange(a, b) for s, a, b in zip(self.kept, starts, stops)}

    def _transform_chunk(self, x):
        n = x.shape[0]
        out = np.empty((n, self.n_features))
        rows = self.table[self.kept]
        counts = self._counts[self.kept]
        col = 0
        cache = {}
        for (rep_i, ch, start, end), m in zip(rows, counts):
            if rep_i not in cache:
                # only representations with surviving rows are ever computed
                cache[rep_i] = _represent(self.config.representations[rep_i], x)
            seg = cache[rep_i][:, ch, start:end]
            feats = interpolated_quantiles(seg, int(m))
            feats[:, 1::2] -= seg.mean(axis=-1, keepdims=True)
            out[:, col : col + m] = feats
            col += m
        return out

    def transform(self, x, n_jobs=1, chunk_size=256):
        x = _as_values(x)
        if x.shape[1:] != (self.n_channels, self.length):
            raise ValueError(
                f"input shape {x.shape[1:]} does not match fitted "
                f"{(self.n_channels, self.length)}"
            )
        if x.shape[0] == 0:
            return np.zeros((0, self.n_features))
        parts = chunked_map(lambda a, b: self._transform_chunk(x[a:b]), x.shape[0], chunk_size, n_jobs)
        return np.concatenate(parts, axis=0)

    def prune(self, keep):
        keep = np.unique(np.asarray(sorted(keep), dtype=np.int64))
        if keep.size == 0:
            raise ValueError("keep set is empty")
        if not np.isin(keep, self.kept).all():
            raise ValueError("keep contains set ids not present in this transform")
        return QuantTransform(self.config, self.n_channels, self.length, self.table, keep)

    def computed_representations(self):
        return sorted({self.config.representations[i] for i in self.table[self.kept, 0]})

    def to_bytes(self):
        cfg = asdict(self.config)
        cfg["representations"] = list(cfg["representations"])
        meta = {"config": cfg, "d": self.n_channels, "l": self.length}
        return _blob.pack("quant", meta, {"table": self.table, "kept": self.kept})

    @classmethod
    def from_bytes(cls, blob):
        _, meta, arrays = _blob.unpack(blob, "quant")
        return cls(QuantConfig(**meta["config"]), meta["d"], meta["l"], arrays["table"], arrays["kept"])

    def __repr__(self):
        return f"QuantTransform(sets={self.n_sets}/{self.n_sets_total}, q={self.n_features})"


def quant_fit(config, n_channels, length):
    """Build the dyadic interval table for ``(d, l)`` input."""
    if config.depth is not None and length < 2**config.depth:
        raise ValueError(f"series length {length} < 2**depth = {2**config.depth}")
    rows = []
    for rep_i, rep in enumerate(config.representations):
        rep_len = representation_length(rep, length)
        if rep_len < 1:
            continue
        if config.depth is None:
            depth = min(DEFAULT_DEPTH, int(np.floor(np.log2(max(rep_len, 2) / 2))))
        else:
            depth = min(config.depth, int(np.floor(np.log2(rep_len))))
        for ch in range(n_channels):
            for level in range(depth + 1):
                bounds = (np.arange(2**level + 1) * rep_len) // 2**level
                rows.extend((rep_i, ch, a, b) for a, b in zip(bounds[:-1], bounds[1:]))
    return QuantTransform(config, n_channels, length, np.array(rows, dtype=np.int64))


def quant_transform(transform, x, n_jobs=1):
    return transform.transform(x, n_jobs=n_jobs)


def quant_prune(transform, keep):
    return transform.prune(keep)
