import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import r2_hand

from playervalue.dataset import FeatureTable
from playervalue.errors import BadK, FoldError, ZeroVariance
from playervalue.evaltune import (
    GridSpec,
    MetricReport,
    ModelSpec,
    cross_validate,
    fit_pipeline,
    grid_search,
    kfold_split,
    r_squared,
    rmse,
)
from playervalue.synth import friedman1
from playervalue.transform import fit_lambda, forward, inverse
from playervalue.trees import fit_regressor

SMALL = {"n_estimators": 20, "max_depth": 2}


def positive_table(n=60, seed=0, m=3):
    r = np.random.default_rng(seed)
    X = r.uniform(size=(n, m))
    y = np.exp(1.0 + 2.0 * X[:, 0] + 0.3 * r.normal(size=n))
    return FeatureTable([f"c{j}" for j in range(m)], X, y)


# -- metrics ------------------------------------------------------------------------


def test_r2_fixtures():
    assert r_squared([1, 2, 3], [1, 2, 4]) == 0.5
    assert r_squared([1, 2, 3], [1, 2, 3]) == 1.0
    assert r_squared([1, 2, 3], [2, 2, 2]) == 0.0


def test_rmse_fixtures():
    assert rmse([0, 0], [3, 4]) == math.sqrt(12.5)
    assert rmse([0, 0], [3, 4]) == pytest.approx(3.5355339059327378, abs=0)
    assert rmse([5.0, 1.0], [5.0, 1.0]) == 0.0


def test_metric_errors():
    with pytest.raises(ZeroVariance):
        r_squared([2, 2, 2], [1, 2, 3])
    with pytest.raises(ValueError):
        rmse([1, 2], [1])
    with pytest.raises(ValueError):
        rmse([], [])


def test_metric_report_constant_target():
    rep = MetricReport.compute([3.0, 3.0], [3.0, 3.0], "euro")
    assert math.isnan(rep.r_squared) and rep.rmse == 0.0
    assert rep.to_dict()["scale"] == "euro"


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=2, max_size=30),
       st.floats(0.01, 100))
def test_metric_properties(pairs, c):
    y = np.array([p[0] for p in pairs])
    yh = np.array([p[1] for p in pairs])
    assert rmse(c * y, c * yh) == pytest.approx(c * rmse(y, yh), rel=1e-9, abs=1e-9)
    assert rmse(y, yh) >= 0
    if np.ptp(y) > 1e-3:
        r2 = r_squared(y, yh)
        assert r2 <= 1.0
        assert r2 == pytest.approx(r2_hand(y, yh), rel=1e-9, abs=1e-9)


# -- folds ---------------------------------------------------------------------------


def test_kfold_sizes():
    assert sorted(np.bincount(kfold_split(10, 5, 0))) == [2, 2, 2, 2, 2]
    assert sorted(np.bincount(kfold_split(11, 5, 0))) == [2, 2, 2, 2, 3]


def test_kfold_errors():
    with pytest.raises(BadK):
        kfold_split(4, 5)
    with pytest.raises(BadK):
        kfold_split(10, 1)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(2, 200), data=st.data(), seed=st.integers(0, 1000))
def test_kfold_partition(n, data, seed):
    k = data.draw(st.integers(2, n))
    f = kfold_split(n, k, seed)
    assert f.shape == (n,) and set(f) == set(range(k))
    counts = np.bincount(f, minlength=k)
    assert counts.max() - counts.min() <= 1
    np.testing.assert_array_equal(f, kfold_split(n, k, seed))


# -- cross validation -------------------------------------------------------------------


def test_constant_target_cv():
    r = np.random.default_rng(0)
    t = FeatureTable(["a", "b"], r.normal(size=(20, 2)), np.full(20, 7.0))
    res = cross_validate(ModelSpec("gbdt", SMALL), t, k=4, seed=0)
    np.testing.assert_allclose(res.oof_euro, 7.0, rtol=0, atol=1e-9)
    for scale in ("euro", "transformed"):
        assert all(rep.rmse == pytest.approx(0.0, abs=1e-9) for rep in res.fold_reports(scale))


def test_loo_matches_hand_loop():
    t = positive_table(n=6, seed=4)
    spec = ModelSpec("gbdt", {"n_estimators": 5, "max_depth": 1, "min_samples_leaf": 1}, seed=3)
    res = cross_validate(spec, t, k=6, seed=11)
    assert res.k == 6
    for j in range(6):
        (i,) = np.flatnonzero(res.fold_assignments == j)
        train = np.flatnonzero(res.fold_assignments != j)
        box = fit_lambda(t.target[train])
        model = fit_regressor("gbdt", t.matrix[train], forward(t.target[train], box), spec.params, 3)
        pt = model.predict(t.matrix[i:i + 1])[0]
        pe = inverse(np.array([pt]), box)[0]
        assert abs(res.oof_transformed[i] - pt) <= 1e-12
        assert abs(res.oof_euro[i] - pe) <= 1e-12 * abs(pe)
        assert abs(res.folds[j]["euro"].rmse - abs(t.target[i] - pe)) <= 1e-12 * abs(t.target[i])
    assert res.mean_rmse == pytest.approx(np.mean([f["euro"].rmse for f in res.folds]), rel=1e-12)


def test_friedman_cv_r2():
    t = friedman1(2000, seed=0)
    res = cross_validate(ModelSpec("gbdt", boxcox=False), t, k=5, seed=0, metric_scale="transformed")
    assert res.mean_r_squared >= 0.85


def test_leakage_guard():
    """Perturbing a fold's held-out rows must not move that fold's fitted statistics."""
    t = positive_table(n=50, seed=1)
    X = t.matrix.copy()
    X[::7, 1] = np.nan  # marker column with gaps, so imputation means are fitted
    t = t.with_matrix(X)
    spec = ModelSpec("gbdt", SMALL, impute=True)
    folds = kfold_split(t.n_rows, 5, 2)
    base = cross_validate(spec, t, folds=folds)
    for j in range(5):
        rows = folds == j
        Xp, yp = t.matrix.copy(), t.target.copy()
        Xp[rows & ~np.isnan(Xp[:, 1]), 1] += 1e3
        yp[rows] *= 50.0
        pert = cross_validate(spec, FeatureTable(t.feature_names, Xp, yp, t.row_ids), folds=folds)
        assert pert.fold_stats[j] == base.fold_stats[j]
        assert pert.fold_stats[j].imputer_means["c1"] == base.fold_stats[j].imputer_means["c1"]
        assert pert.fold_stats[j].boxcox.lmbda == base.fold_stats[j].boxcox.lmbda
        # the same rows sit on the training side of every other fold
        other = (j + 1) % 5
        assert pert.fold_stats[other].boxcox.lmbda != base.fold_stats[other].boxcox.lmbda
        assert pert.fold_stats[other].imputer_means["c1"] != base.fold_stats[other].imputer_means["c1"]


def test_fold_error_carries_index(monkeypatch):
    import playervalue.evaltune as et

    calls = {"n": 0}
    real = et.fit_regressor

    def flaky(*a, **kw):
        calls["n"] += 1
        if calls["n"] == 3:
            raise RuntimeError("boom")
        return real(*a, **kw)

    monkeypatch.setattr(et, "fit_regressor", flaky)
    with pytest.raises(FoldError) as info:
        cross_validate(ModelSpec("gbdt", SMALL), positive_table(), k=4)
    assert info.value.fold == 2


def test_fit_pipeline_scores_both_scales():
    t = positive_table(n=80)
    fitted = fit_pipeline(ModelSpec("gbdt", SMALL), t)
    s = fitted.score(t)
    assert set(s) == {"euro", "transformed"}
    np.testing.assert_allclose(fitted.predict(t), fitted.inverse_target(fitted.predict_transformed(t)))


# -- grid search ----------------------------------------------------------------------


def test_grid_spec():
    g = GridSpec("gbdt", {"max_depth": [1, 2], "learning_rate": [0.1, 0.2, 0.3]})
    assert g.size == 6
    assert g.points()[:3] == [{"max_depth": 1, "learning_rate": v} for v in (0.1, 0.2, 0.3)]
    with pytest.raises(ValueError):
        GridSpec("gbdt", {"max_depth": []})
    with pytest.raises(ValueError):
        GridSpec("gbdt", {"bootstrap": [True]})


def test_singleton_grid(tmp_path):
    res = grid_search(GridSpec("gbdt", {"max_depth": [2]}), positive_table(), k=3, base_params=SMALL)
    assert res.best_params == {"max_depth": 2}
    res.write_csv(tmp_path / "g.csv")
    rows = list(csv.DictReader(open(tmp_path / "g.csv")))
    assert {r["point"] for r in rows} == {"0"}
    assert sum(r["fold"] == "mean" for r in rows) == 2
    res.write_json(tmp_path / "g.json")
    assert json.loads((tmp_path / "g.json").read_text())["result"]["best_index"] == 0


def test_dominant_config_selected():
    t = friedman1(300, seed=1)
    g = GridSpec("gbdt", {"max_depth": [0, 3]})
    res = grid_search(g, t, k=3, boxcox=False, base_params={"n_estimators": 50})
    assert res.best_params == {"max_depth": 3}
    res = grid_search(g, t, k=3, boxcox=False, criterion="rmse", base_params={"n_estimators": 50})
    assert res.best_params == {"max_depth": 3}


def test_duplicate_best_first_wins():
    g = GridSpec("gbdt", {"max_depth": [0, 2, 2]})
    res = grid_search(g, positive_table(), k=3, base_params={"n_estimators": 20})
    assert res.best_index == 1
    assert res.results[1].mean_r_squared == res.results[2].mean_r_squared


def test_grid_points_share_folds():
    g = GridSpec("gbdt", {"max_depth": [1, 2]})
    res = grid_search(g, positive_table(), k=4, seed=5, base_params={"n_estimators": 10})
    np.testing.assert_array_equal(res.results[0].fold_assignments, res.results[1].fold_assignments)
