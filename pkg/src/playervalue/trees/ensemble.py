"""Gradient-boosted and bagged ensembles of regression trees.

Both model types predict ``offset + scale * sum(tree(x) for tree in trees)``:
a boosted model uses ``(base_score, learning_rate)``, a forest ``(0, 1/T)``.
The explain module relies on this shared form.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .cart import RegressionTree, TreeParams, _check_X, _grow, check_Xy, presort

GBDT_DEFAULT_TREE_PARAMS = TreeParams(max_depth=3, min_samples_split=2, min_samples_leaf=1)
FOREST_DEFAULT_TREE_PARAMS = TreeParams(
    max_depth=15, min_samples_split=3, min_samples_leaf=3, feature_subsample=None
)


class PackedTrees(NamedTuple):
    """All nodes of an ensemble concatenated; child ids are absolute."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    roots: np.ndarray
    max_depth: int


def pack_trees(trees) -> PackedTrees:
    if not trees:
        e_i, e_f = np.zeros(0, np.int64), np.zeros(0)
        return PackedTrees(e_i, e_f, e_i, e_i, e_f, e_f, e_i, 0)
    sizes = np.array([t.n_nodes for t in trees])
    roots = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)

    def shifted(arr, off):
        return np.where(arr >= 0, arr + off, -1)

    return PackedTrees(
        np.concatenate([t.feature for t in trees]).astype(np.int64),
        np.concatenate([t.threshold for t in trees]).astype(np.float64),
        np.concatenate([shifted(t.left, o) for t, o in zip(trees, roots)]).astype(np.int64),
        np.concatenate([shifted(t.right, o) for t, o in zip(trees, roots)]).astype(np.int64),
        np.concatenate([t.value for t in trees]).astype(np.float64),
        np.concatenate([t.cover for t in trees]).astype(np.float64),
        roots,
        max(t.depth for t in trees),
    )


class _Ensemble:
    trees: tuple
    n_features: int

    @property
    def offset(self) -> float:
        raise NotImplementedError

    @property
    def scale(self) -> float:
        raise NotImplementedError

    @functools.cached_property
    def packed(self) -> PackedTrees:
        return pack_trees(self.trees)

    def predict(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        p = self.packed
        total = _kernels.predict_packed(X, p.feature, p.threshold, p.left, p.right, p.value, p.roots)
        return self.offset + self.scale * total


@dataclass(eq=False)
class GbdtModel(_Ensemble):
    base_score: float
    learning_rate: float
    trees: tuple
    n_features: int
    tree_params: TreeParams = GBDT_DEFAULT_TREE_PARAMS
    seed: int = 0
    train_sse: tuple = field(default=(), repr=False)

    family = "gbdt"

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    @property
    def offset(self) -> float:
        return self.base_score

    @property
    def scale(self) -> float:
        return self.learning_rate


@dataclass(eq=False)
class RandomForestModel(_Ensemble):
    trees: tuple
    n_features: int
    bootstrap: bool = True
    seed: int = 0
    tree_params: TreeParams = FOREST_DEFAULT_TREE_PARAMS

    family = "forest"

    @property
    def n_estimators(self) -> int:
        return len(self.trees)

    @property
    def offset(self) -> float:
        return 0.0

    @property
    def scale(self) -> float:
        return 1.0 / len(self.trees) if self.trees else 0.0


def _tree_seeds(seed: int, n: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(n)


def fit_gbdt(
    X,
    y,
    learning_rate: float = 0.1,
    n_estimators: int = 900,
    tree_params: TreeParams | None = None,
    seed: int = 0,
) -> GbdtModel:
    """Least-squares gradient boosting.

    Starts from the mean of ``y``; each tree is fitted to the residuals of
    the running prediction and added with weight ``learning_rate``.  The
    training SSE after each stage is kept in ``train_sse`` (length
    ``n_estimators + 1``).
    """
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    if n_estimators < 0:
        raise ValueError("n_estimators must be >= 0")
    params = tree_params or GBDT_DEFAULT_TREE_PARAMS
    X, y = check_Xy(X, y)
    order = presort(X)
    base = float(y.mean())
    total = np.zeros(len(y))
    pred = np.full(len(y), base)
    sse = [float(((y - pred) ** 2).sum())]
    trees = []
    for ss in _tree_seeds(seed, n_estimators):
        tree = _grow(X, y - pred, order.copy(), params, int(ss.generate_state(1)[0]))
        trees.append(tree)
        total = total + tree.predict(X)
        pred = base + learning_rate * total
        sse.append(float(((y - pred) ** 2).sum()))
    return GbdtModel(base, float(learning_rate), tuple(trees), X.shape[1], params, seed, tuple(sse))


def predict_gbdt(model: GbdtModel, X) -> np.ndarray:
    return model.predict(X)


def fit_forest(
    X,
    y,
    params: TreeParams | None = None,
    n_estimators: int = 700,
    seed: int = 0,
    bootstrap: bool = True,
) -> RandomForestModel:
    """Bagged regression trees.

    Each tree sees a same-size bootstrap resample (unless ``bootstrap`` is
    off) and a fresh random feature subset at every split.
    """
    if n_estimators < 1:
        raise ValueError("n_estimators must be >= 1")
    params = params or FOREST_DEFAULT_TREE_PARAMS
    X, y = check_Xy(X, y)
    n = len(y)
    order = presort(X)
    trees = []
    for ss in _tree_seeds(seed, n_estimators):
        kernel_seed = int(ss.generate_state(1)[0])
        if bootstrap:
            counts = np.bincount(np.random.default_rng(ss).integers(0, n, n), minlength=n)
            rows = np.repeat(np.arange(n), counts)
            Xb = np.ascontiguousarray(X[rows])
            tree = _grow(Xb, y[rows], _kernels.expand_order(order, counts), params, kernel_seed)
        else:
            tree = _grow(X, y, order.copy(), params, kernel_seed)
        trees.append(tree)
    return RandomForestModel(tuple(trees), X.shape[1], bootstrap, seed, params)


def gain_importance(model) -> np.ndarray:
    """Total SSE reduction per feature over every split of every tree."""
    imp = np.zeros(model.n_features)
    for tree in model.trees:
        internal = tree.feature >= 0
        np.add.at(imp, tree.feature[internal], tree.gain[internal])
    return imp


GBDT_DEFAULTS = {
    "learning_rate": 0.1,
    "n_estimators": 900,
    "max_depth": 3,
    "min_samples_split": 2,
    "min_samples_leaf": 1,
    "feature_subsample": 1.0,
}
FOREST_DEFAULTS = {
    "n_estimators": 700,
    "max_depth": 15,
    "min_samples_split": 3,
    "min_samples_leaf": 3,
    "feature_subsample": None,
    "bootstrap": True,
}
FAMILY_DEFAULTS = {"gbdt": GBDT_DEFAULTS, "forest": FOREST_DEFAULTS}


def resolve_params(family: str, params: dict | None = None) -> dict:
    """Family defaults overlaid with ``params``; unknown keys are an error."""
    if family not in FAMILY_DEFAULTS:
        raise ValueError(f"unknown model family {family!r}; expected one of {sorted(FAMILY_DEFAULTS)}")
    defaults = FAMILY_DEFAULTS[family]
    params = dict(params or {})
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValueError(f"unknown {family} parameter(s): {sorted(unknown)}")
    return {**defaults, **params}


def check_params(family: str, params: dict | None = None) -> tuple[dict, TreeParams]:
    """Resolved parameters and their ``TreeParams``; raises ``ValueError`` if invalid."""
    p = resolve_params(family, params)
    tp = TreeParams(
        max_depth=int(p["max_depth"]),
        min_samples_split=int(p["min_samples_split"]),
        min_samples_leaf=int(p["min_samples_leaf"]),
        feature_subsample=None if p["feature_subsample"] is None else float(p["feature_subsample"]),
    )
    if int(p["n_estimators"]) < 1:
        raise ValueError("n_estimators must be >= 1")
    if family == "gbdt" and not float(p["learning_rate"]) > 0:
        raise ValueError("learning_rate must be > 0")
    return p, tp


def fit_regressor(family: str, X, y, params: dict | None = None, seed: int = 0):
    """Fit a ``"gbdt"`` or ``"forest"`` model from a flat parameter dict."""
    p, tp = check_params(family, params)
    if family == "gbdt":
        return fit_gbdt(X, y, float(p["learning_rate"]), int(p["n_estimators"]), tp, seed)
    return fit_forest(X, y, tp, int(p["n_estimators"]), seed, bool(p["bootstrap"]))
