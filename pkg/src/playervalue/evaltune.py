"""Regression metrics, k-fold cross-validation and exhaustive grid search.

Every statistic learned from data (imputation means, the Box-Cox lambda,
the trees) is refitted inside each fold from the training side only.
Scores are reported on two scales: ``"transformed"`` compares model output
with the Box-Cox transformed target, ``"euro"`` inverse-transforms the
predictions and compares them with the raw target.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dataset import FeatureTable, MeanImputer
from .errors import BadK, DegenerateInput, FoldError, ZeroVariance
from .transform import BoxCoxParams, fit_lambda, forward, inverse
from .trees import fit_regressor, resolve_params

log = logging.getLogger(__name__)

SCALES = ("euro", "transformed")


def _pair(y_true, y_pred) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(y_true, dtype=np.float64).reshape(-1)
    b = np.asarray(y_pred, dtype=np.float64).reshape(-1)
    if len(a) != len(b):
        raise ValueError(f"length mismatch: {len(a)} targets, {len(b)} predictions")
    if len(a) == 0:
        raise ValueError("metrics need at least one row")
    return a, b


def r_squared(y_true, y_pred) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``.

    Raises
    ------
    ZeroVariance
        ``y_true`` is constant, so ``SS_tot`` is zero.
    """
    y, p = _pair(y_true, y_pred)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ZeroVariance("R^2 is undefined for a constant target")
    return 1.0 - float(((y - p) ** 2).sum()) / ss_tot


def rmse(y_true, y_pred) -> float:
    y, p = _pair(y_true, y_pred)
    return math.sqrt(float(((y - p) ** 2).mean()))


@dataclass(frozen=True)
class MetricReport:
    """R^2 and RMSE on one scale; ``r_squared`` is NaN for a constant target."""

    r_squared: float
    rmse: float
    scale: str

    @classmethod
    def compute(cls, y_true, y_pred, scale: str) -> "MetricReport":
        if scale not in SCALES:
            raise ValueError(f"scale must be one of {SCALES}, got {scale!r}")
        try:
            r2 = r_squared(y_true, y_pred)
        except ZeroVariance:
            r2 = math.nan
        return cls(r2, rmse(y_true, y_pred), scale)

    def to_dict(self) -> dict:
        return {
            "r_squared": None if math.isnan(self.r_squared) else self.r_squared,
            "rmse": self.rmse,
            "scale": self.scale,
        }


def kfold_split(n: int, k: int = 5, seed: int = 0) -> np.ndarray:
    """Fold id for each of ``n`` rows.

    A seeded permutation is cut into ``k`` consecutive chunks; the first
    ``n % k`` folds get one extra row.
    """
    n, k = int(n), int(k)
    if not 2 <= k <= n:
        raise BadK(f"k must satisfy 2 <= k <= n, got k={k}, n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=np.int64)
    for j, chunk in enumerate(np.array_split(perm, k)):
        folds[chunk] = j
    return folds


@dataclass(frozen=True)
class ModelSpec:
    """What to fit: model family and parameters plus target/feature preprocessing.

    ``params`` overlays the family defaults (see ``trees.FAMILY_DEFAULTS``).
    """

    family: str = "gbdt"
    params: dict = field(default_factory=dict)
    boxcox: bool = True
    impute: bool = False
    seed: int = 0

    def __post_init__(self):
        resolve_params(self.family, self.params)

    def with_params(self, **params) -> "ModelSpec":
        return ModelSpec(self.family, {**self.params, **params}, self.boxcox, self.impute, self.seed)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": resolve_params(self.family, self.params),
            "boxcox": self.boxcox,
            "impute": self.impute,
            "seed": self.seed,
        }


@dataclass(eq=False)
class FittedPipeline:
    """Imputer, target transform and model fitted together on one table."""

    model: object
    feature_names: tuple[str, ...]
    boxcox: BoxCoxParams | None
    imputer: MeanImputer | None

    def _matrix(self, table: FeatureTable) -> np.ndarray:
        if table.feature_names != self.feature_names:
            table = table.select(self.feature_names)
        if self.imputer is not None:
            table = self.imputer.transform(table)
        return np.asarray(table.matrix)

    def transform_target(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.float64)
        return forward(y, self.boxcox) if self.boxcox is not None else y.copy()

    def inverse_target(self, t, errors: str = "raise") -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return inverse(t, self.boxcox, errors) if self.boxcox is not None else t.copy()

    def predict_transformed(self, table: FeatureTable) -> np.ndarray:
        return self.model.predict(self._matrix(table))

    def predict(self, table: FeatureTable, errors: str = "raise") -> np.ndarray:
        """Predictions on the original (euro) scale."""
        return self.inverse_target(self.predict_transformed(table), errors)

    def score(self, table: FeatureTable) -> dict[str, MetricReport]:
        t_pred = self.predict_transformed(table)
        return {
            "euro": MetricReport.compute(table.target, self.inverse_target(t_pred), "euro"),
            "transformed": MetricReport.compute(
                self.transform_target(table.target), t_pred, "transformed"
            ),
        }


def fit_pipeline(spec: ModelSpec, table: FeatureTable) -> FittedPipeline:
    """Fit imputer, Box-Cox lambda and model on ``table``.

    A constant target has no likelihood maximum; the transform is then
    skipped and the model is fitted on the raw target.
    """
    imputer = None
    if spec.impute:
        imputer = MeanImputer.fit(table)
        table = imputer.transform(table)
    box = None
    y = np.asarray(table.target)
    if spec.boxcox:
        try:
            box = fit_lambda(y)
            y = forward(y, box)
        except DegenerateInput:
            if np.ptp(y) != 0:
                raise
            log.warning("constant target; fitting without a Box-Cox transform")
    model = fit_regressor(spec.family, table.matrix, y, spec.params, spec.seed)
    return FittedPipeline(model, table.feature_names, box, imputer)


@dataclass(frozen=True)
class FoldStats:
    """Statistics learned on the training side of one fold."""

    fold: int
    n_train: int
    n_test: int
    boxcox: BoxCoxParams | None
    imputer_means: dict | None

    def to_dict(self) -> dict:
        return {
            "fold": self.fold,
            "n_train": self.n_train,
            "n_test": self.n_test,
            "boxcox": self.boxcox.to_dict() if self.boxcox else None,
            "imputer_means": self.imputer_means,
        }


def _mean(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    return float(v.mean()) if not np.isnan(v).any() else math.nan


@dataclass(eq=False)
class CvResult:
    k: int
    seed: int
    metric_scale: str
    fold_assignments: np.ndarray = field(repr=False)
    folds: list = field(repr=False)  # per fold: {"euro": MetricReport, "transformed": MetricReport}
    fold_stats: list = field(repr=False)
    oof_transformed: np.ndarray = field(repr=False)
    oof_euro: np.ndarray = field(repr=False)

    def mean(self, scale: str | None = None) -> MetricReport:
        scale = scale or self.metric_scale
        return MetricReport(
            _mean([f[scale].r_squared for f in self.folds]),
            _mean([f[scale].rmse for f in self.folds]),
            scale,
        )

    @property
    def mean_r_squared(self) -> float:
        return self.mean().r_squared

    @property
    def mean_rmse(self) -> float:
        return self.mean().rmse

    def fold_reports(self, scale: str | None = None) -> list[MetricReport]:
        return [f[scale or self.metric_scale] for f in self.folds]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "seed": self.seed,
            "metric_scale": self.metric_scale,
            "folds": [
                {"fold": j, **{s: f[s].to_dict() for s in SCALES}} for j, f in enumerate(self.folds)
            ],
            "mean": {s: self.mean(s).to_dict() for s in SCALES},
            "fold_stats": [s.to_dict() for s in self.fold_stats],
        }


def cross_validate(
    spec: ModelSpec,
    table: FeatureTable,
    k: int = 5,
    seed: int = 0,
    metric_scale: str = "euro",
    folds: np.ndarray | None = None,
) -> CvResult:
    """k-fold CV of ``spec`` on ``table``.

    Pass ``folds`` (one fold id per row) to reuse an assignment; otherwise
    ``kfold_split(table.n_rows, k, seed)`` is used.  Any failure inside a
    fold is re-raised as ``FoldError`` carrying the fold index.
    """
    if metric_scale not in SCALES:
        raise ValueError(f"metric_scale must be one of {SCALES}, got {metric_scale!r}")
    if folds is None:
        folds = kfold_split(table.n_rows, k, seed)
    else:
        folds = np.asarray(folds, dtype=np.int64)
        if len(folds) != table.n_rows:
            raise ValueError("fold assignment length does not match the table")
        k = int(folds.max()) + 1
    oof_t = np.full(table.n_rows, np.nan)
    oof_e = np.full(table.n_rows, np.nan)
    reports, stats = [], []
    for j in range(k):
        test_idx = np.flatnonzero(folds == j)
        train_idx = np.flatnonzero(folds != j)
        train, test = table.take(train_idx), table.take(test_idx)
        try:
            fitted = fit_pipeline(spec, train)
            oof_t[test_idx] = fitted.predict_transformed(test)
            oof_e[test_idx] = fitted.inverse_target(oof_t[test_idx])
            reports.append(fitted.score(test))
        except Exception as exc:
            raise FoldError(j, exc) from exc
        means = dict(fitted.imputer.means) if fitted.imputer is not None else None
        stats.append(FoldStats(j, len(train_idx), len(test_idx), fitted.boxcox, means))
        log.debug("fold %d/%d: %s", j + 1, k, reports[-1][metric_scale])
    return CvResult(k, seed, metric_scale, folds, reports, stats, oof_t, oof_e)


@dataclass(frozen=True)
class GridSpec:
    """Named hyperparameter axes; points are enumerated first axis slowest."""

    family: str
    axes: dict

    def __post_init__(self):
        if not self.axes:
            raise ValueError("grid needs at least one axis")
        for name, values in self.axes.items():
            if len(values) == 0:
                raise ValueError(f"grid axis {name!r} is empty")
        resolve_params(self.family, {name: values[0] for name, values in self.axes.items()})

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.axes.values())

    def points(self) -> list[dict]:
        names = list(self.axes)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.axes.values())]

    def to_dict(self) -> dict:
        return {"family": self.family, "axes": {k: list(v) for k, v in self.axes.items()}}


@dataclass(eq=False)
class GridResult:
    grid: GridSpec
    criterion: str
    best_index: int
    points: list
    results: list = field(repr=False)

    @property
    def best_params(self) -> dict:
        return dict(self.points[self.best_index])

    @property
    def best_result(self) -> CvResult:
        return self.results[self.best_index]

    def table_rows(self) -> list[dict]:
        """One row per (point, fold, scale) plus a ``fold="mean"`` row per (point, scale)."""
        rows = []
        for i, (point, res) in enumerate(zip(self.points, self.results)):
            for scale in SCALES:
                entries = [(str(j), r) for j, r in enumerate(res.fold_reports(scale))]
                entries.append(("mean", res.mean(scale)))
                for fold, rep in entries:
                    rows.append({"point": i, **point, "fold": fold, "scale": scale,
                                 "r_squared": rep.r_squared, "rmse": rep.rmse})
        return rows

    def write_csv(self, path) -> None:
        cols = ["point", *self.grid.axes, "fold", "scale", "r_squared", "rmse"]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for row in self.table_rows():
                w.writerow([_cell(row[c]) for c in cols])

    def to_dict(self) -> dict:
        return {
            "grid": self.grid.to_dict(),
            "criterion": self.criterion,
            "best_index": self.best_index,
            "best_params": self.best_params,
            "points": [
                {"point": i, "params": p, "cv": r.to_dict()}
                for i, (p, r) in enumerate(zip(self.points, self.results))
            ],
        }

    def write_json(self, path, extra: dict | None = None) -> None:
        d = {"report": "grid_search", "schema_version": 1, **(extra or {}), "result": self.to_dict()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(_jsonable(d), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return "" if v is None else str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def grid_search(
    grid: GridSpec,
    table: FeatureTable,
    k: int = 5,
    seed: int = 0,
    metric_scale: str = "euro",
    criterion: str = "r2",
    boxcox: bool = True,
    impute: bool = False,
    base_params: dict | None = None,
) -> GridResult:
    """Cross-validate every grid point on one shared fold assignment.

    ``criterion="r2"`` picks the highest mean R^2 and ``"rmse"`` the lowest
    mean RMSE, both on ``metric_scale``.  The earliest point wins ties.
    Models are seeded with ``seed``.
    """
    if criterion not in ("r2", "rmse"):
        raise ValueError(f"criterion must be 'r2' or 'rmse', got {criterion!r}")
    folds = kfold_split(table.n_rows, k, seed)
    points = grid.points()
    results = []
    best, best_score = 0, -math.inf
    for i, point in enumerate(points):
        spec = ModelSpec(grid.family, {**(base_params or {}), **point}, boxcox, impute, seed)
        res = cross_validate(spec, table, k, seed, metric_scale, folds=folds)
        results.append(res)
        score = res.mean_r_squared if criterion == "r2" else -res.mean_rmse
        log.info("grid point %d/%d %s: R2=%.4f RMSE=%.4g", i + 1, len(points), point,
                 res.mean_r_squared, res.mean_rmse)
        if score > best_score:
            best, best_score = i, score
    return GridResult(grid, criterion, best, points, results)
