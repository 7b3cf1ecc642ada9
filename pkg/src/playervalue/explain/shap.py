"""Exact Shapley values for tree ensembles under path-dependent perturbation.

Absent features are marginalised by descending both children of a split
weighted by the children's training cover.  ``tree_shap`` computes these
values in polynomial time; ``brute_force_shap`` enumerates every feature
subset and exists to check it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import MissingCover, ShapeMismatch, TooManyFeatures, UnknownFeature
from ..trees.cart import RegressionTree
from ..trees.ensemble import pack_trees
from ._treeshap import tree_shap_packed

BRUTE_FORCE_MAX_FEATURES = 12


@dataclass(frozen=True, eq=False)
class Explanation:
    """Per-row, per-feature SHAP values on the model's output scale.

    ``base_value + shap_values[i].sum()`` equals the model prediction for
    row ``i``.
    """

    base_value: float
    shap_values: np.ndarray
    feature_values: np.ndarray
    feature_names: tuple[str, ...]
    row_ids: tuple[str, ...] = ()

    @property
    def n_samples(self) -> int:
        return self.shap_values.shape[0]

    @property
    def predictions(self) -> np.ndarray:
        return self.base_value + self.shap_values.sum(axis=1)

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise UnknownFeature(name) from None


def _parts(model):
    """(trees, offset, scale, n_features) for a tree or an ensemble."""
    if isinstance(model, RegressionTree):
        return (model,), 0.0, 1.0, model.n_features
    return tuple(model.trees), float(model.offset), float(model.scale), model.n_features


def _check_cover(trees) -> None:
    for t in trees:
        c = t.cover
        if c is None or len(c) != t.n_nodes or not np.all(c > 0):
            raise MissingCover("every node needs a positive training cover")


def tree_expectation(tree: RegressionTree) -> float:
    """Cover-weighted mean of the leaf values."""
    _check_cover((tree,))
    exp = np.array(tree.value, dtype=np.float64)
    for node in range(tree.n_nodes - 1, -1, -1):
        if tree.feature[node] >= 0:
            l, r = tree.left[node], tree.right[node]
            exp[node] = (exp[l] * tree.cover[l] + exp[r] * tree.cover[r]) / tree.cover[node]
    return float(exp[0])


def expected_value(model) -> float:
    """Model output with every feature marginalised out (the SHAP base value)."""
    trees, offset, scale, _ = _parts(model)
    return offset + scale * math.fsum(tree_expectation(t) for t in trees)


def tree_shap(model, X, feature_names: Sequence[str] | None = None, row_ids=()) -> Explanation:
    trees, offset, scale, m = _parts(model)
    _check_cover(trees)
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != m:
        raise ShapeMismatch(f"model expects {m} features, got shape {X.shape}")
    if feature_names is None:
        feature_names = getattr(model, "feature_names", None) or [f"x{j}" for j in range(m)]
    if len(feature_names) != m:
        raise ShapeMismatch(f"{len(feature_names)} feature names for {m} features")
    p = pack_trees(trees)
    if len(trees):
        phi = tree_shap_packed(
            X, p.feature, p.threshold, p.left, p.right, p.value, p.cover, p.roots, scale, p.max_depth
        )
    else:
        phi = np.zeros(X.shape)
    return Explanation(expected_value(model), phi, X, tuple(feature_names), tuple(row_ids))


def _cond_tree(tree: RegressionTree, x: np.ndarray, present: frozenset) -> float:
    def rec(node):
        f = tree.feature[node]
        if f < 0:
            return tree.value[node]
        l, r = tree.left[node], tree.right[node]
        if f in present:
            return rec(l if x[f] <= tree.threshold[node] else r)
        return (tree.cover[l] * rec(l) + tree.cover[r] * rec(r)) / tree.cover[node]

    return rec(0)


def conditional_expectation(model, x, present) -> float:
    """Model output at ``x`` when only features in ``present`` are known."""
    trees, offset, scale, _ = _parts(model)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    present = frozenset(int(i) for i in present)
    return offset + scale * sum(_cond_tree(t, x, present) for t in trees)


def brute_force_shap(model, x) -> np.ndarray:
    """Shapley values by summing over all 2**M coalitions."""
    trees, _, _, m = _parts(model)
    if m > BRUTE_FORCE_MAX_FEATURES:
        raise TooManyFeatures(f"{m} features exceeds the limit of {BRUTE_FORCE_MAX_FEATURES}")
    _check_cover(trees)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != m:
        raise ShapeMismatch(f"model expects {m} features, got {x.shape[0]}")
    value = {}
    for size in range(m + 1):
        for subset in itertools.combinations(range(m), size):
            s = frozenset(subset)
            value[s] = conditional_expectation(model, x, s)
    phi = np.zeros(m)
    for i in range(m):
        others = [j for j in range(m) if j != i]
        for size in range(m):
            w = math.factorial(size) * math.factorial(m - size - 1) / math.factorial(m)
            for subset in itertools.combinations(others, size):
                s = frozenset(subset)
                phi[i] += w * (value[s | {i}] - value[s])
    return phi
