import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import path_dependent_value, random_ensemble, random_tree, shapley_from_value_fn
from scipy import stats

from playervalue.dataset import FeatureTable
from playervalue.errors import MissingCover, RowOutOfRange, ShapeMismatch, TooManyFeatures, UnknownFeature
from playervalue.explain import (
    Explanation,
    beeswarm_data,
    brute_force_shap,
    expected_value,
    force_data,
    mean_abs_importance,
    pdp,
    percentile_ranks,
    quantile_grid,
    shap_dependence,
    tree_shap,
)
from playervalue.transform import BoxCoxParams, forward
from playervalue.trees import GbdtModel, RegressionTree, TreeParams, fit_forest, fit_gbdt, fit_tree


def stump(left=2.0, right=4.0, covers=(50, 50), feature=0, threshold=0.5, n_features=3):
    return RegressionTree(
        feature=np.array([feature, -1, -1]),
        threshold=np.array([threshold, 0.0, 0.0]),
        left=np.array([1, -1, -1]),
        right=np.array([2, -1, -1]),
        value=np.array([0.0, left, right]),
        cover=np.array([float(sum(covers)), *map(float, covers)]),
        gain=np.zeros(3),
        n_features=n_features,
    )


def expl_from(phi, X=None, names=None):
    phi = np.asarray(phi, float)
    X = np.asarray(X if X is not None else np.arange(phi.size).reshape(phi.shape), float)
    names = tuple(names or [f"f{j}" for j in range(phi.shape[1])])
    return Explanation(0.0, phi, X, names, tuple(f"r{i}" for i in range(len(phi))))


# -- expected value and SHAP examples -------------------------------------------------


def test_stump_expected_value_and_phi():
    t = stump()
    assert expected_value(t) == 3.0
    e = tree_shap(t, np.array([[0.9, 5.0, 5.0]]))
    np.testing.assert_allclose(e.shap_values, [[1.0, 0.0, 0.0]], atol=1e-12)
    assert e.base_value == 3.0


def test_single_leaf_ensemble():
    m = GbdtModel(1.5, 0.1, (RegressionTree.leaf(2.0, 10, 3),), 3)
    e = tree_shap(m, np.ones((4, 3)))
    assert np.all(e.shap_values == 0)
    assert e.base_value == pytest.approx(1.7)
    assert force_data(e, 0).contributions == ()
    assert force_data(e, 0).prediction_transformed == pytest.approx(1.7)
    assert all(r["shap_value"] == 0 for r in shap_dependence(e, "x1"))


def test_expected_value_equals_mean_training_prediction(rng):
    X = rng.normal(size=(300, 4))
    y = X[:, 0] ** 2 + X[:, 1]
    t = fit_tree(X, y, TreeParams(max_depth=5))
    assert expected_value(t) == pytest.approx(t.predict(X).mean(), abs=1e-8)
    f = fit_forest(X, y, TreeParams(max_depth=4), n_estimators=5, bootstrap=False)
    assert expected_value(f) == pytest.approx(f.predict(X).mean(), abs=1e-8)


def test_tree_shap_matches_both_oracles_on_50_ensembles():
    r = np.random.default_rng(7)
    for k in range(50):
        model, x = random_ensemble(r)
        phi = tree_shap(model, x[None, :]).shap_values[0]
        bf = brute_force_shap(model, x)
        np.testing.assert_allclose(phi, bf, rtol=0, atol=1e-9, err_msg=str(k))
        v = path_dependent_value(model.trees, model.base_score, model.learning_rate, x)
        np.testing.assert_allclose(phi, shapley_from_value_fn(v, model.n_features), rtol=0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_tree_shap_oracle_property(seed):
    model, x = random_ensemble(np.random.default_rng(seed))
    e = tree_shap(model, x[None, :])
    np.testing.assert_allclose(e.shap_values[0], brute_force_shap(model, x), rtol=0, atol=1e-9)
    assert abs(e.predictions[0] - model.predict(x[None, :])[0]) < 1e-8


def test_local_accuracy_trained_gbdt(rng):
    X = rng.normal(size=(400, 6))
    y = np.sin(X[:, 0]) + X[:, 1] * X[:, 2] + rng.normal(size=400) * 0.1
    m = fit_gbdt(X, y, n_estimators=100)
    e = tree_shap(m, X[:200])
    assert np.max(np.abs(e.predictions - m.predict(X[:200]))) < 1e-8


def test_dummy_feature_gets_zero(rng):
    X = rng.normal(size=(200, 4))
    X[:, 2] = 0.0
    m = fit_gbdt(X, X[:, 0] + X[:, 1], n_estimators=30)
    assert np.all(tree_shap(m, rng.normal(size=(50, 4))).shap_values[:, 2] == 0)


def test_additivity_across_trees():
    r = np.random.default_rng(3)
    t1, t2 = random_tree(r, 4, 3), random_tree(r, 4, 3)
    X = r.uniform(-1, 1, size=(20, 4))
    both = tree_shap(GbdtModel(0.0, 0.3, (t1, t2), 4), X).shap_values
    parts = 0.3 * (tree_shap(t1, X).shap_values + tree_shap(t2, X).shap_values)
    np.testing.assert_allclose(both, parts, atol=1e-12)


def test_symmetry_duplicated_column():
    # symmetric tree over identical columns 0 and 1
    t = RegressionTree(
        feature=np.array([0, 1, 1, -1, -1, -1, -1]),
        threshold=np.array([0.5, 0.5, 0.5, 0, 0, 0, 0]),
        left=np.array([1, 3, 5, -1, -1, -1, -1]),
        right=np.array([2, 4, 6, -1, -1, -1, -1]),
        value=np.array([0, 0, 0, 1.0, 2.0, 2.0, 5.0]),
        cover=np.array([40.0, 20, 20, 10, 10, 10, 10]),
        gain=np.zeros(7),
        n_features=2,
    )
    phi = brute_force_shap(t, [0.9, 0.9])
    assert phi[0] == pytest.approx(phi[1])
    np.testing.assert_allclose(tree_shap(t, [[0.9, 0.9]]).shap_values[0], phi, atol=1e-12)


def test_brute_force_single_feature():
    t = stump(n_features=1)
    assert brute_force_shap(t, [0.1])[0] == pytest.approx(2.0 - 3.0)


def test_shap_errors():
    t = stump()
    with pytest.raises(ShapeMismatch):
        tree_shap(t, np.zeros((2, 4)))
    bad = RegressionTree(t.feature.copy(), t.threshold.copy(), t.left.copy(), t.right.copy(),
                         t.value.copy(), np.array([100.0, 0.0, 50.0]), t.gain.copy(), 3)
    with pytest.raises(MissingCover):
        tree_shap(bad, np.zeros((1, 3)))
    with pytest.raises(TooManyFeatures):
        brute_force_shap(RegressionTree.leaf(1.0, 5, 13), np.zeros(13))


# -- exports ----------------------------------------------------------------------------


def test_mean_abs_importance_fixture():
    e = expl_from([[1.0, -2.0], [-3.0, 0.0], [2.0, 1.0]], names=["b", "a"])
    assert mean_abs_importance(e) == [("b", 2.0), ("a", 1.0)]
    zero = expl_from(np.zeros((3, 2)), names=["b", "a"])
    assert mean_abs_importance(zero) == [("a", 0.0), ("b", 0.0)]
    one = expl_from([[0.0, 0.1], [0.0, -0.2]])
    assert mean_abs_importance(one)[0][0] == "f1"


def test_beeswarm_counts_and_percentiles(rng):
    phi = rng.normal(size=(7, 4))
    X = rng.normal(size=(7, 4))
    e = expl_from(phi, X)
    assert len(beeswarm_data(e)) == 28
    top = mean_abs_importance(e)[0][0]
    rows = beeswarm_data(e, top_n=1)
    assert len(rows) == 7 and {r["feature"] for r in rows} == {top}
    assert len(beeswarm_data(e, top_n=9)) == 28
    j = e.feature_names.index(top)
    pct = {r["feature_value"]: r["feature_value_percentile"] for r in rows}
    assert pct[X[:, j].min()] == 0.0 and pct[X[:, j].max()] == 1.0


def test_percentile_ranks():
    np.testing.assert_allclose(percentile_ranks([3, 1, 2]), [1.0, 0.0, 0.5])
    np.testing.assert_allclose(percentile_ranks([4, 4, 4]), [0.5, 0.5, 0.5])


def test_force_data(rng):
    X = rng.normal(size=(100, 3))
    m = fit_gbdt(X, X[:, 0] - 2 * X[:, 1], n_estimators=20)
    e = tree_shap(m, X[:5])
    rec = force_data(e, 2)
    total = rec.base_value + sum(c["shap_value"] for c in rec.contributions)
    assert abs(total - rec.prediction_transformed) < 1e-8
    mags = [abs(c["shap_value"]) for c in rec.contributions]
    assert mags == sorted(mags, reverse=True)
    with pytest.raises(RowOutOfRange):
        force_data(e, 5)


def test_force_data_euro_scale():
    box = BoxCoxParams(0.5)
    target = forward(np.array([4.0]), box)[0]
    e = Explanation(target - 1.0, np.array([[1.0, 0.0]]), np.zeros((1, 2)), ("a", "b"), ("p",))
    rec = force_data(e, 0, box)
    assert rec.prediction_euro == pytest.approx(4.0)
    assert not rec.out_of_domain
    # lambda 0.5 cannot represent values below -2
    low = Explanation(-5.0, np.array([[0.0, 0.0]]), np.zeros((1, 2)), ("a", "b"), ("p",))
    rec = force_data(low, 0, box)
    assert rec.out_of_domain and rec.prediction_euro is None
    assert "scale_note" in rec.to_dict()


def test_pdp_stump_steps_at_threshold(rng):
    X = rng.uniform(size=(200, 3))
    t = stump(left=2.0, right=4.0, threshold=0.5)
    table = FeatureTable(["a", "b", "c"], X, np.zeros(200))
    curve = pdp(t, table, "a", grid_size=20)
    assert np.all(np.diff(curve.grid) > 0)
    np.testing.assert_array_equal(curve.mean_prediction, np.where(curve.grid <= 0.5, 2.0, 4.0))
    flat = pdp(t, table, "b", grid_size=20)
    np.testing.assert_allclose(flat.mean_prediction, t.predict(X).mean())
    with pytest.raises(UnknownFeature):
        pdp(t, table, "zzz")


def test_pdp_additive_model(rng):
    X = rng.uniform(size=(150, 2))

    class Additive:
        def predict(self, M):
            return np.sin(3 * M[:, 0]) + M[:, 1] ** 2

    table = FeatureTable(["g", "h"], X, np.zeros(150))
    c = pdp(Additive(), table, "g", grid_size=15)
    diff = c.mean_prediction - np.sin(3 * c.grid)
    assert np.ptp(diff) < 1e-12


def test_quantile_grid():
    assert len(quantile_grid(np.arange(1000.0), 50)) == 50
    np.testing.assert_array_equal(quantile_grid([5.0] * 10, 50), [5.0])
    g = quantile_grid([1.0, 1.0, 2.0, np.nan], 50)
    assert g[0] == 1.0 and g[-1] == 2.0 and np.all(np.diff(g) > 0) and len(g) <= 50
    with pytest.raises(ValueError):
        quantile_grid([np.nan], 5)


def test_shap_dependence_monotone(rng):
    n = 600
    X = rng.uniform(size=(n, 4))
    y = 5 * X[:, 1] + 0.1 * rng.normal(size=n)
    m = fit_gbdt(X, y, n_estimators=200)
    e = tree_shap(m, X, ["a", "b", "c", "d"])
    pts = shap_dependence(e, "b")
    assert len(pts) == n
    rho = stats.spearmanr([p["feature_value"] for p in pts], [p["shap_value"] for p in pts]).statistic
    assert rho >= 0.9
    with pytest.raises(UnknownFeature):
        shap_dependence(e, "zz")
