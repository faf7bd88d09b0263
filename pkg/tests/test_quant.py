import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrant import QuantConfig, QuantTransform, quant_fit, quant_prune, quant_transform
from hydrant.quant import REPRESENTATIONS, _represent, interpolated_quantiles, representation_length


def linear_quantile(values, p):
    """Textbook linear interpolation on sorted values at position p * (n - 1)."""
    v = sorted(values)
    pos = p * (len(v) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (v[hi] - v[lo]) * (pos - lo)


def test_depth_two_tiling():
    t = quant_fit(QuantConfig(depth=2, representations=("identity",)), 1, 8)
    assert [tuple(r[2:]) for r in t.table] == [
        (0, 8), (0, 4), (4, 8), (0, 2), (2, 4), (4, 6), (6, 8)
    ]
    assert t.n_sets == 7


def test_depth_zero_all_representations():
    t = quant_fit(QuantConfig(depth=0), 1, 20)
    assert t.n_sets == 4
    assert [r[3] for r in t.table] == [20, 19, 18, 11]


def test_quantile_count():
    t = quant_fit(QuantConfig(depth=0, divisor=4, representations=("identity",)), 1, 8)
    assert t.set_sizes().tolist() == [2]
    t = quant_fit(QuantConfig(depth=0, divisor=4, representations=("identity",)), 1, 3)
    assert t.set_sizes().tolist() == [1]


def test_median_example():
    t = quant_fit(QuantConfig(depth=0, divisor=4, representations=("identity",)), 1, 4)
    z = t.transform(np.array([[[1.0, 2.0, 3.0, 4.0]]]))
    assert z.tolist() == [[2.5]]
    assert linear_quantile([1, 2, 3, 4], 0.5) == 2.5


def test_mean_subtraction_example():
    t = quant_fit(QuantConfig(depth=0, divisor=2, representations=("identity",)), 1, 4)
    z = t.transform(np.array([[[0.0, 0.0, 10.0, 10.0]]]))
    assert [linear_quantile([0, 0, 10, 10], p) for p in (0.25, 0.75)] == [0, 10]
    assert z.tolist() == [[0.0, 5.0]]


def test_constant_series():
    cfg = QuantConfig(depth=2, divisor=100)
    t = quant_fit(cfg, 1, 16)
    z = t.transform(np.full((1, 1, 16), 3.5))
    reps = t.table[:, 0]
    ident = reps == REPRESENTATIONS.index("identity")
    diffs = np.isin(reps, [1, 2])
    assert np.all(z[0, ident] == 3.5)
    assert np.all(z[0, diffs] == 0)


def test_interpolated_quantiles_oracle(rng):
    for _ in range(20):
        n = int(rng.integers(1, 30))
        m = int(rng.integers(1, 8))
        seg = rng.normal(size=(1, n))
        got = interpolated_quantiles(seg, m)[0]
        want = [linear_quantile(seg[0], (j + 0.5) / m) for j in range(m)]
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)
        np.testing.assert_allclose(got, np.quantile(seg[0], (np.arange(m) + 0.5) / m), atol=1e-12)


def test_default_depth_capped():
    t = quant_fit(QuantConfig(), 1, 10)
    widths = t.table[:, 3] - t.table[:, 2]
    assert widths.min() >= 2
    t = quant_fit(QuantConfig(), 1, 1000)
    assert t.table[:, 0].tolist().count(0) == 2**7 - 1


def test_explicit_depth_errors_when_too_deep():
    with pytest.raises(ValueError):
        quant_fit(QuantConfig(depth=4), 1, 8)


@pytest.mark.parametrize("kwargs", [dict(depth=-1), dict(divisor=0), dict(representations=()), dict(representations=("wavelet",))])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        QuantConfig(**kwargs)


def test_sinusoid_fourier_peak():
    l, cycles = 64, 5
    x = np.sin(2 * np.pi * cycles * np.arange(l) / l)[None, None, :]
    spec = _represent("fourier-magnitude", x)[0, 0]
    assert spec.shape == (representation_length("fourier-magnitude", l),)
    assert int(np.argmax(spec)) == cycles


def test_fourier_skipped_when_pruned(small_ds):
    t = quant_fit(QuantConfig(), 1, small_ds.l)
    fourier = REPRESENTATIONS.index("fourier-magnitude")
    keep = {s for s in range(t.n_sets) if t.table[s, 0] != fourier}
    p = quant_prune(t, keep)
    assert "fourier-magnitude" not in p.computed_representations()
    full = quant_transform(t, small_ds)
    cols = np.concatenate([t.set_index[s] for s in sorted(keep)])
    assert np.array_equal(quant_transform(p, small_ds), full[:, cols])


def test_keep_all_is_identity(multi_ds):
    t = quant_fit(QuantConfig(), multi_ds.d, multi_ds.l)
    assert np.array_equal(t.prune(range(t.n_sets)).transform(multi_ds), t.transform(multi_ds))


def test_serialization_roundtrip(multi_ds):
    t = quant_fit(QuantConfig(depth=3, divisor=3), multi_ds.d, multi_ds.l).prune({0, 4, 9})
    back = QuantTransform.from_bytes(t.to_bytes())
    assert np.array_equal(back.transform(multi_ds), t.transform(multi_ds))
    assert back.config == t.config


def test_parallel_matches_serial(multi_ds):
    t = quant_fit(QuantConfig(), multi_ds.d, multi_ds.l)
    assert np.array_equal(t.transform(multi_ds, n_jobs=3, chunk_size=7), t.transform(multi_ds))


@settings(max_examples=40, deadline=None)
@given(l=st.integers(2, 200), depth=st.integers(0, 7), d=st.integers(1, 3))
def test_tiling_property(l, depth, d):
    if l < 2**depth:
        return
    t = quant_fit(QuantConfig(depth=depth), d, l)
    for rep_i, rep in enumerate(REPRESENTATIONS):
        rep_len = representation_length(rep, l)
        rows = t.table[t.table[:, 0] == rep_i]
        for ch in range(d):
            sub = rows[rows[:, 1] == ch]
            # consecutive tiles per level: each level restarts at 0
            starts = np.flatnonzero(sub[:, 2] == 0)
            for a, b in zip(starts, list(starts[1:]) + [len(sub)]):
                level = sub[a:b]
                assert level[0, 2] == 0 and level[-1, 3] == rep_len
                assert np.all(level[1:, 2] == level[:-1, 3])
                assert np.all(level[:, 3] > level[:, 2])
    sizes = t.set_sizes()
    cols = np.concatenate(list(t.set_index.values()))
    assert np.array_equal(cols, np.arange(sizes.sum()))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_order_invariance_within_interval(seed):
    rng = np.random.default_rng(seed)
    l = 32
    t = quant_fit(QuantConfig(depth=3, representations=("identity",)), 1, l)
    x = rng.normal(size=(1, 1, l))
    # permute inside every finest tile, which lies inside every coarser tile too
    y = x.copy()
    for a in range(0, l, 4):
        y[0, 0, a : a + 4] = rng.permutation(y[0, 0, a : a + 4])
    np.testing.assert_allclose(t.transform(x), t.transform(y), atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), data=st.data())
def test_pruning_consistency_property(seed, data):
    t = quant_fit(QuantConfig(depth=3), 2, 24)
    keep = data.draw(st.sets(st.integers(0, t.n_sets - 1), min_size=1))
    x = np.random.default_rng(seed).normal(size=(3, 2, 24))
    full = t.transform(x)
    cols = np.concatenate([t.set_index[s] for s in sorted(keep)])
    assert np.array_equal(t.prune(keep).transform(x), full[:, cols])
