import itertools
import warnings
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrant import (
    HydraConfig,
    PrunedPipeline,
    QuantConfig,
    SetImportance,
    TreeConfig,
    generate_synthetic,
    mean_set_importance,
    pruning_error_bound,
    ridge_fit,
    select_top_sets,
    sorted_tail_bound,
    split_folds,
    SyntheticSpec,
    train_pipeline,
    train_pruned,
)
from hydrant.pruning import ImportanceEntry, PruneDecision, n_keep, probe_points

SMALL = dict(
    hydra_config=HydraConfig(n_groups=4),
    quant_config=QuantConfig(depth=3),
    tree_config=TreeConfig(n_trees=10),
)


def decimal_keep(S, zeta):
    raw = ((Decimal(1) - Decimal(str(zeta))) * S).quantize(Decimal(1), rounding=ROUND_HALF_UP)
    return max(1, min(S, int(raw)))


def _importance(values, sizes=None, origin="hydra"):
    sizes = sizes or [1] * len(values)
    entries, col = [], 0
    for s, (v, m) in enumerate(zip(values, sizes)):
        entries.append(ImportanceEntry(s, float(v), np.arange(col, col + m), origin))
        col += m
    return SetImportance(tuple(entries))


def test_mean_importance_examples():
    imp = mean_set_importance(np.array([0.2, -0.4]), {0: [0, 1]})
    assert imp.entries[0].importance == pytest.approx(0.3)
    assert all(e.importance == 0 for e in mean_set_importance(np.zeros((6, 2)), {0: [0, 1], 1: [2, 3, 4, 5]}).entries)
    beta = np.array([[0.2, 0.6], [0.4, 0.0]])
    assert mean_set_importance(beta, {0: [0, 1]}).entries[0].importance == pytest.approx(0.3)


def test_signed_importance_flag():
    beta = np.array([[0.5, -0.5], [0.1, 0.1]])
    signed = mean_set_importance(beta, {0: [0], 1: [1]}, absolute=False)
    assert [e.importance for e in signed.entries] == [0.0, pytest.approx(0.1)]


def test_selection_examples():
    imp = _importance([0.1, 0.9, 0.5])
    d = select_top_sets(imp, 1 / 3)
    assert d.r == {"hydra": 2} and d.kept["hydra"] == {1, 2}
    assert select_top_sets(imp, 0.0).kept["hydra"] == {0, 1, 2}
    assert n_keep(48, 0.8) == 10


def test_selection_ties_go_to_lower_id():
    d = select_top_sets(_importance([0.5, 0.5, 0.5, 0.1]), 0.5)
    assert d.kept["hydra"] == {0, 1}


def test_n_keep_clamps_with_warning():
    with pytest.warns(UserWarning):
        assert n_keep(3, 0.9) == 1
    with pytest.raises(ValueError):
        n_keep(5, 1.0)


@settings(max_examples=200, deadline=None)
@given(S=st.integers(1, 500), zeta=st.sampled_from([i / 20 for i in range(20)]))
def test_n_keep_matches_decimal_rounding(S, zeta):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert n_keep(S, zeta) == decimal_keep(S, zeta)


def test_per_origin_selection():
    imp = _importance([0.9, 0.8, 0.7, 0.6], origin="hydra") + _importance([0.01, 0.02], origin="quant")
    d = select_top_sets(imp, 0.5)
    assert d.kept == {"hydra": {0, 1}, "quant": {1}}


def test_bound_examples():
    model = ridge_fit(np.eye(3)[[0, 1, 2, 0, 1, 2]], [0, 1, 2, 0, 1, 2], lambdas=[1.0], standardize=False, fit_intercept=False)
    imp = mean_set_importance(model.coef, {0: [0], 1: [1], 2: [2]})
    nothing = select_top_sets(imp, 0.0)
    rep = pruning_error_bound(model, nothing, np.eye(3))
    assert np.all(rep.pruned_mass == 0) and np.all(rep.bound == 0) and np.all(rep.deviation == 0)
    assert rep.satisfied and rep.domain == "empirical"


def test_bound_direct_sum():
    # B = 1 and dropped |beta| = (0.1, 0.2)
    class Stub:
        coef = np.array([[1.0], [0.1], [-0.2]])
        intercept = np.zeros(1)
        n_features = 3
        n_classes = 1

        def standardize(self, Z):
            return np.asarray(Z, dtype=float)

    imp = _importance([1.0, 0.1, 0.2])
    d = PruneDecision(0.5, {"hydra": frozenset({0})}, {"hydra": 1}, imp)
    Z = np.array([[1.0, -1.0, 0.5], [0.0, 0.3, -0.2]])
    rep = pruning_error_bound(Stub(), d, Z, Z_eval=Z)
    assert rep.B == 1.0
    assert rep.bound[0] == pytest.approx(0.3)
    assert rep.satisfied


def test_tail_bound_examples(rng):
    Z = rng.normal(size=(30, 6))
    y = rng.integers(0, 2, 30)
    model = ridge_fit(Z, y)
    sets = {0: [0, 1], 1: [2, 3], 2: [4, 5]}
    imp = mean_set_importance(model.coef, sets)
    assert sorted_tail_bound(model, imp, 3, Z) == 0.0
    B = np.abs(model.standardize(Z)).max()
    assert sorted_tail_bound(model, imp, 0, Z) == pytest.approx(B * np.abs(model.coef).sum(axis=0).max())
    d = select_top_sets(imp, 1 / 3)
    rep = pruning_error_bound(model, d, Z)
    assert sorted_tail_bound(model, imp, d.r["hydra"], Z) == pytest.approx(rep.bound.max())


def _brute_best(values, r):
    return max(
        (frozenset(c) for c in itertools.combinations(range(len(values)), r)),
        key=lambda c: sum(values[i] for i in c),
    )


@settings(max_examples=150, deadline=None)
@given(
    values=st.lists(st.floats(0, 10, allow_nan=False), min_size=3, max_size=8, unique=True),
    size=st.integers(1, 5),
    zeta=st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.9]),
)
def test_selection_maximizes_retained_mass(values, size, zeta):
    imp = _importance(values, [size] * len(values))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        d = select_top_sets(imp, zeta)
    r = d.r["hydra"]
    mass = lambda kept: sum(values[i] * size for i in kept)  # noqa: E731
    assert mass(d.kept["hydra"]) == pytest.approx(mass(_brute_best(values, r)))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), zeta=st.sampled_from([0.2, 0.5, 0.8]), q_sets=st.integers(3, 8))
def test_bound_soundness_property(seed, zeta, q_sets):
    rng = np.random.default_rng(seed)
    sizes = rng.integers(1, 4, q_sets)
    q = int(sizes.sum())
    Z = rng.normal(size=(40, q)) * rng.uniform(0.1, 5, q)
    y = rng.integers(0, 3, 40)
    y[:3] = [0, 1, 2]
    model = ridge_fit(Z, y)
    sets, col = {}, 0
    for s, m in enumerate(sizes):
        sets[s] = np.arange(col, col + m)
        col += m
    d = select_top_sets(mean_set_importance(model.coef, sets), zeta)
    rep = pruning_error_bound(model, d, Z, n_probes=300, seed=seed)
    assert rep.satisfied
    np.testing.assert_allclose(rep.bound, rep.B * rep.pruned_mass)


def test_probe_points_within_ranges(rng):
    Z = rng.normal(size=(20, 4))
    P = probe_points(Z, 500, seed=1)
    assert P.shape == (500, 4)
    assert np.all(P >= Z.min(0)) and np.all(P <= Z.max(0))


def test_zero_importance_removal_is_neutral(rng):
    Z = rng.normal(size=(30, 6))
    y = rng.integers(0, 2, 30)
    model = ridge_fit(Z, y)
    model.coef[[4, 5]] = 0.0
    imp = mean_set_importance(model.coef, {0: [0, 1], 1: [2, 3], 2: [4, 5]})
    d = select_top_sets(imp, 1 / 3)
    assert d.kept["hydra"] == {0, 1}
    probe = rng.normal(size=(100, 6)) * 50
    rep = pruning_error_bound(model, d, Z, Z_eval=probe)
    assert np.all(rep.deviation == 0)


@pytest.mark.parametrize("method", ["hydra", "quant", "hydrant"])
def test_zeta_zero_matches_unpruned(small_ds, method):
    train, test = split_folds(small_ds, 0)
    full = train_pipeline(train, method, **SMALL)
    zero = train_pruned(train, method, zeta=0.0, **SMALL)
    assert np.array_equal(full.features(test), zero.features(test))
    assert np.array_equal(full.predict(test), zero.predict(test))


def test_pipeline_shapes_and_provenance(small_ds):
    pipe = train_pruned(small_ds, "hydrant", zeta=0.8, **SMALL)
    assert pipe.classifier.n_features == pipe.n_features
    n_h, n_q = pipe.hydra.n_sets_total, pipe.quant.n_sets_total
    assert pipe.hydra.n_sets == n_keep(n_h, 0.8)
    assert pipe.quant.n_sets == n_keep(n_q, 0.8)
    prov = pipe.provenance
    assert prov["zeta"] == 0.8 and prov["temporary_lambda"] > 0
    assert len(prov["importance"]) == n_h + n_q
    assert pipe.features(small_ds).shape == (small_ds.n, pipe.n_features)


def test_default_final_classifier(small_ds):
    from hydrant import RidgeModel, TreeEnsemble

    assert isinstance(train_pipeline(small_ds, "hydra", **SMALL).classifier, RidgeModel)
    assert isinstance(train_pipeline(small_ds, "quant", **SMALL).classifier, TreeEnsemble)
    assert isinstance(train_pipeline(small_ds, "hydrant", final="ridge", **SMALL).classifier, RidgeModel)
    with pytest.raises(ValueError):
        train_pipeline(small_ds, "rocket")


def test_pipeline_serialization(small_ds):
    pipe = train_pruned(small_ds, "hydrant", zeta=0.5, **SMALL)
    back = PrunedPipeline.from_bytes(pipe.to_bytes())
    assert np.array_equal(back.predict(small_ds), pipe.predict(small_ds))
    assert back.provenance["kept"] == pipe.provenance["kept"]


def test_pruned_accuracy_on_separable_data():
    ds = generate_synthetic(SyntheticSpec(n=90, d=1, l=64, n_classes=2, kind="sinusoid-frequency", noise=0.0, seed=2))
    train, test = split_folds(ds, 0)
    full = train_pipeline(train, "hydrant")
    pruned = train_pruned(train, "hydrant", zeta=0.8)
    acc_full = np.mean(full.predict(test) == test.labels)
    acc_pruned = np.mean(pruned.predict(test) == test.labels)
    assert acc_full == 1.0
    assert acc_pruned >= acc_full - 0.05
    # nearest centroid on Fourier magnitudes separates the classes as well
    mag = np.abs(np.fft.rfft(ds.values[:, 0], axis=-1))
    tr, te = ds.folds != 0, ds.folds == 0
    cent = np.stack([mag[tr][ds.labels[tr] == c].mean(0) for c in (0, 1)])
    nc = np.argmin(((mag[te][:, None] - cent) ** 2).sum(-1), axis=1)
    assert np.all(nc == ds.labels[te])
