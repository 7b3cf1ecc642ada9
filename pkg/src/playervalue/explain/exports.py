"""Tabular exports derived from an ``Explanation``, plus partial dependence.

SHAP values live on the model's (Box-Cox transformed) output scale.  Euro
figures are obtained by inverse-transforming whole predictions only; the
per-feature contributions are never individually mapped back, since the
inverse transform is nonlinear.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from ..dataset import FeatureTable
from ..errors import RowOutOfRange, UnknownFeature
from ..transform import BoxCoxParams, inverse
from .shap import Explanation

BEESWARM_COLUMNS = ("feature", "row_id", "shap_value", "feature_value", "feature_value_percentile")
DEPENDENCE_COLUMNS = ("row_id", "feature_value", "shap_value")
PDP_COLUMNS = ("feature", "grid_value", "mean_prediction", "scale")


def _row_ids(expl: Explanation) -> tuple[str, ...]:
    return expl.row_ids if expl.row_ids else tuple(str(i) for i in range(expl.n_samples))


def mean_abs_importance(expl: Explanation) -> list[tuple[str, float]]:
    """Mean |SHAP| per feature, largest first; equal scores sort by name."""
    if expl.n_samples == 0:
        raise ValueError("explanation has no rows")
    scores = np.abs(expl.shap_values).mean(axis=0)
    pairs = [(name, float(s)) for name, s in zip(expl.feature_names, scores)]
    return sorted(pairs, key=lambda p: (-p[1], p[0]))


def percentile_ranks(values) -> np.ndarray:
    """Average-rank percentile in [0, 1]: the minimum maps to 0, the maximum to 1.

    A constant column maps to 0.5 everywhere.
    """
    v = np.asarray(values, dtype=np.float64)
    if len(v) == 1 or np.ptp(v) == 0:
        return np.full(len(v), 0.5)
    r = rankdata(v, method="average")
    lo, hi = r.min(), r.max()
    return (r - lo) / (hi - lo)


def beeswarm_data(expl: Explanation, top_n: int | None = None) -> list[dict]:
    """Long-format rows for the ``top_n`` features by mean |SHAP| (all when None).

    Features appear in importance order, rows in explanation order.  The
    percentile of the feature value within its column serves as the colour.
    """
    ranking = mean_abs_importance(expl)
    if top_n is not None:
        ranking = ranking[: max(0, int(top_n))]
    ids = _row_ids(expl)
    rows = []
    for name, _ in ranking:
        j = expl.feature_index(name)
        vals = expl.feature_values[:, j]
        pct = percentile_ranks(vals)
        for i in range(expl.n_samples):
            rows.append({
                "feature": name,
                "row_id": ids[i],
                "shap_value": float(expl.shap_values[i, j]),
                "feature_value": float(vals[i]),
                "feature_value_percentile": float(pct[i]),
            })
    return rows


@dataclass(frozen=True)
class ForceRecord:
    """One row's additive breakdown; contributions are sorted by |shap_value|."""

    row_id: str
    base_value: float
    prediction_transformed: float
    prediction_euro: float | None
    out_of_domain: bool
    contributions: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "row_id": self.row_id,
            "base_value": self.base_value,
            "prediction_transformed": self.prediction_transformed,
            "prediction_euro": self.prediction_euro,
            "out_of_domain": self.out_of_domain,
            "scale_note": (
                "base_value, shap_value and prediction_transformed are on the model "
                "(transformed) scale; prediction_euro inverts the whole prediction only"
            ),
            "contributions": [dict(c) for c in self.contributions],
        }


def force_data(expl: Explanation, row: int, boxcox: BoxCoxParams | None = None) -> ForceRecord:
    """Contributions for explained row ``row``; zero contributions are dropped.

    Without ``boxcox`` the model scale is taken to be the euro scale.
    """
    if not 0 <= row < expl.n_samples:
        raise RowOutOfRange(f"row {row} outside 0..{expl.n_samples - 1}")
    phi = expl.shap_values[row]
    pred = float(expl.base_value + phi.sum())
    if boxcox is None:
        euro, ood = pred, False
    else:
        euro = float(inverse(np.array([pred]), boxcox, errors="nan")[0])
        ood = math.isnan(euro)
        euro = None if ood else euro
    order = sorted(np.flatnonzero(phi != 0), key=lambda j: (-abs(phi[j]), j))
    contributions = tuple(
        {
            "feature": expl.feature_names[j],
            "feature_value": float(expl.feature_values[row, j]),
            "shap_value": float(phi[j]),
        }
        for j in order
    )
    return ForceRecord(_row_ids(expl)[row], float(expl.base_value), pred, euro, ood, contributions)


@dataclass(frozen=True)
class PdpCurve:
    feature: str
    grid: np.ndarray
    mean_prediction: np.ndarray
    scale: str = "transformed"

    def rows(self) -> list[dict]:
        return [
            {"feature": self.feature, "grid_value": float(g), "mean_prediction": float(p), "scale": self.scale}
            for g, p in zip(self.grid, self.mean_prediction)
        ]


def quantile_grid(values, grid_size: int = 50) -> np.ndarray:
    """``grid_size`` evenly spaced quantiles with duplicates removed."""
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    v = np.asarray(values, dtype=np.float64)
    v = v[~np.isnan(v)]
    if len(v) == 0:
        raise ValueError("no observed values to build a grid from")
    if grid_size == 1:
        return np.array([float(np.median(v))])
    return np.unique(np.quantile(v, np.linspace(0.0, 1.0, grid_size)))


def pdp(
    model,
    table: FeatureTable,
    feature: str,
    grid_size: int = 50,
    boxcox: BoxCoxParams | None = None,
    scale: str = "transformed",
) -> PdpCurve:
    """Partial dependence of ``model`` on ``feature`` over ``table``.

    For each grid value the feature is set to that value in every row and
    the predictions are averaged.  ``model.predict`` receives matrices with
    the table's columns.  On ``scale="euro"`` each prediction is
    inverse-transformed with ``boxcox`` before averaging (out-of-domain
    predictions give NaN).
    """
    if feature not in table.feature_names:
        raise UnknownFeature(feature)
    if table.n_rows == 0:
        raise ValueError("table has no rows")
    if scale not in ("transformed", "euro"):
        raise ValueError(f"scale must be 'transformed' or 'euro', got {scale!r}")
    j = table.feature_index(feature)
    grid = quantile_grid(table.matrix[:, j], grid_size)
    X = np.array(table.matrix)
    means = np.empty(len(grid))
    for g, v in enumerate(grid):
        X[:, j] = v
        pred = model.predict(X)
        if scale == "euro" and boxcox is not None:
            pred = inverse(pred, boxcox, errors="nan")
        means[g] = pred.mean()
    return PdpCurve(feature, grid, means, scale)


def shap_dependence(expl: Explanation, feature: str) -> list[dict]:
    """``(row_id, feature_value, shap_value)`` for every explained row."""
    j = expl.feature_index(feature)
    ids = _row_ids(expl)
    return [
        {
            "row_id": ids[i],
            "feature_value": float(expl.feature_values[i, j]),
            "shap_value": float(expl.shap_values[i, j]),
        }
        for i in range(expl.n_samples)
    ]


def write_rows(path, rows: list[dict], columns) -> None:
    """CSV with a fixed column order; floats use ``repr`` so reruns are byte-stable."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in (row[c] for c in columns)])
