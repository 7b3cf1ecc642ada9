"""Single CART regression trees."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch
from . import _kernels


@dataclass(frozen=True)
class TreeParams:
    """Growth limits for one tree.

    ``feature_subsample`` is the fraction of features examined at each
    split (``ceil(fraction * n_features)`` of them, drawn without
    replacement); ``None`` means ``ceil(sqrt(n_features))``.
    """

    max_depth: int = 3
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    feature_subsample: float | None = 1.0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.feature_subsample is not None and not 0 < self.feature_subsample <= 1:
            raise ValueError("feature_subsample must be in (0, 1]")

    def features_per_split(self, n_features: int) -> int:
        if self.feature_subsample is None:
            k = math.ceil(math.sqrt(n_features))
        else:
            k = math.ceil(self.feature_subsample * n_features - 1e-12)
        return max(1, min(n_features, k))

    def to_dict(self) -> dict:
        return {
            "max_depth": self.max_depth,
            "min_samples_split": self.min_samples_split,
            "min_samples_leaf": self.min_samples_leaf,
            "feature_subsample": self.feature_subsample,
        }


@dataclass(frozen=True, eq=False)
class RegressionTree:
    """Binary tree as parallel node arrays.

    ``feature[i] == -1`` marks a leaf.  ``cover[i]`` is the number of
    training rows that reached node ``i`` and ``gain[i]`` the SSE decrease
    of its split (0 at leaves).
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray
    n_features: int

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "value", "cover", "gain"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RegressionTree):
            return NotImplemented
        return self.n_features == other.n_features and all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "left", "right", "value", "cover", "gain")
        )

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def predict(self, X) -> np.ndarray:
        X = _check_X(X, self.n_features)
        return _kernels.predict_packed(
            X, self.feature, self.threshold, self.left, self.right, self.value,
            np.zeros(1, dtype=np.int64),
        )

    @classmethod
    def leaf(cls, value: float, cover: float, n_features: int) -> "RegressionTree":
        return cls(
            np.array([-1]), np.zeros(1), np.array([-1]), np.array([-1]),
            np.array([float(value)]), np.array([float(cover)]), np.zeros(1), n_features,
        )


def _check_X(X, n_features: int | None = None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ShapeMismatch(f"expected a 2-d feature matrix, got {X.ndim} dimensions")
    if n_features is not None and X.shape[1] != n_features:
        raise ShapeMismatch(f"model expects {n_features} features, got {X.shape[1]}")
    return X


def check_Xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = _check_X(X)
    y = np.ascontiguousarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] != y.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows but y has {y.shape[0]} values")
    if X.shape[0] < 1:
        raise ShapeMismatch("cannot fit on zero rows")
    if np.isnan(X).any() or np.isnan(y).any():
        raise ValueError("training data contains NaN; impute or drop first")
    return X, y


def presort(X: np.ndarray) -> np.ndarray:
    """Row indices sorted by each column, shape (n_features, n_rows)."""
    return np.ascontiguousarray(np.argsort(X, axis=0, kind="stable").T.astype(np.int64))


def _grow(X, y, order, params: TreeParams, seed: int) -> RegressionTree:
    arrays = _kernels.build_tree(
        X,
        y,
        order,
        params.max_depth,
        params.min_samples_split,
        params.min_samples_leaf,
        params.features_per_split(X.shape[1]),
        int(seed) % (2**32),
    )
    return RegressionTree(*arrays, n_features=X.shape[1])


def fit_tree(X, y, params: TreeParams | None = None, seed: int = 0) -> RegressionTree:
    """Grow one regression tree by greedy SSE reduction.

    Candidate thresholds are midpoints between consecutive distinct values
    of a feature; rows with ``x <= threshold`` go left.  Among equal-gain
    splits the lowest feature index, then the lowest threshold, wins.  A
    node becomes a leaf at ``max_depth``, when it has fewer than
    ``min_samples_split`` rows, or when no admissible split reduces SSE.
    """
    params = params or TreeParams()
    X, y = check_Xy(X, y)
    return _grow(X, y, presort(X), params, seed)


def predict_tree(tree: RegressionTree, x) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    node = 0
    while tree.feature[node] >= 0:
        node = tree.left[node] if x[tree.feature[node]] <= tree.threshold[node] else tree.right[node]
    return float(tree.value[node])
