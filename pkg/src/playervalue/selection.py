"""Boruta all-relevant feature selection.

Each iteration appends a freshly permuted "shadow" copy of every feature
not yet rejected, fits a tree ensemble, and counts a hit for each
undecided feature whose importance beats the best shadow.  Cumulative
hit counts are compared with a fair coin by a two-sided binomial test,
Bonferroni corrected over the undecided features.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .dataset import FeatureTable
from .errors import ModelFitFailure, TooFewRows
from .explain.shap import tree_shap
from .trees import TreeParams, fit_forest, fit_gbdt, gain_importance

log = logging.getLogger(__name__)

BORUTA_TREE_PARAMS = TreeParams(
    max_depth=6, min_samples_split=3, min_samples_leaf=3, feature_subsample=None
)
MIN_ROWS = 20

ACCEPTED, REJECTED, TENTATIVE = "accepted", "rejected", "tentative"


@dataclass(frozen=True)
class BorutaConfig:
    """Settings for ``run_boruta``.

    The internal model is a random forest (``model="forest"``) or a boosted
    ensemble (``model="gbdt"``, using ``learning_rate``) built from
    ``n_estimators`` trees with ``tree_params``.  With the default ``"shap"``
    importance, mean |SHAP| is computed on at most ``shap_rows`` randomly
    chosen rows per iteration (``None`` uses every row).  With
    ``holdout_fraction`` set, SHAP is computed on that share of rows held
    out from the fit.  ``shadow_policy="active"`` shadows every feature not
    yet rejected; ``"undecided"`` shadows only undecided ones.
    """

    max_iterations: int = 100
    alpha: float = 0.05
    importance_source: str = "shap"
    model: str = "forest"
    n_estimators: int = 100
    tree_params: TreeParams = BORUTA_TREE_PARAMS
    learning_rate: float = 0.1
    shap_rows: int | None = 250
    holdout_fraction: float | None = 0.3
    shadow_policy: str = "active"
    min_iterations: int = 5
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")
        if self.max_iterations < 10:
            raise ValueError("max_iterations must be >= 10")
        if self.importance_source not in ("shap", "gain"):
            raise ValueError(f"importance_source must be 'shap' or 'gain', got {self.importance_source!r}")
        if self.model not in ("forest", "gbdt"):
            raise ValueError(f"model must be 'forest' or 'gbdt', got {self.model!r}")
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.holdout_fraction is not None and not 0 < self.holdout_fraction < 1:
            raise ValueError("holdout_fraction must be in (0, 1) or None")
        if self.shadow_policy not in ("undecided", "active"):
            raise ValueError(f"shadow_policy must be 'undecided' or 'active', got {self.shadow_policy!r}")

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "alpha": self.alpha,
            "importance_source": self.importance_source,
            "model": self.model,
            "n_estimators": self.n_estimators,
            "tree_params": self.tree_params.to_dict(),
            "learning_rate": self.learning_rate,
            "shap_rows": self.shap_rows,
            "holdout_fraction": self.holdout_fraction,
            "shadow_policy": self.shadow_policy,
            "min_iterations": self.min_iterations,
            "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class BorutaVerdict:
    feature_names: tuple[str, ...]
    accepted: tuple[str, ...]
    rejected: tuple[str, ...]
    tentative: tuple[str, ...]
    hit_counts: dict
    iterations_run: int
    # iterations_run x n_features; NaN where a feature was not in the model
    importance_history: np.ndarray = field(repr=False)
    shadow_max_history: np.ndarray = field(repr=False)
    decided_at: dict = field(default_factory=dict)

    def status(self, feature: str) -> str:
        if feature in self.accepted:
            return ACCEPTED
        if feature in self.rejected:
            return REJECTED
        return TENTATIVE

    def selected(self, include_tentative: bool = False) -> tuple[str, ...]:
        keep = set(self.accepted) | (set(self.tentative) if include_tentative else set())
        return tuple(f for f in self.feature_names if f in keep)

    def to_dict(self) -> dict:
        hist = [
            {f: (None if np.isnan(v) else float(v)) for f, v in zip(self.feature_names, row)}
            for row in self.importance_history
        ]
        return {
            "accepted": list(self.accepted),
            "rejected": list(self.rejected),
            "tentative": list(self.tentative),
            "hit_counts": {f: int(self.hit_counts[f]) for f in self.feature_names},
            "decided_at": {f: self.decided_at.get(f) for f in self.feature_names},
            "iterations_run": self.iterations_run,
            "shadow_max_history": [float(v) for v in self.shadow_max_history],
            "importance_history": hist,
        }

    def write_json(self, path, extra: dict | None = None) -> None:
        d = {"report": "boruta", "schema_version": 1, **(extra or {}), "verdict": self.to_dict()}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(d, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_history_csv(self, path) -> None:
        """Long format: one row per (iteration, feature) plus shadow-max rows."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "feature", "importance", "kind", "final_status"])
            for it in range(self.iterations_run):
                for f, v in zip(self.feature_names, self.importance_history[it]):
                    if not np.isnan(v):
                        w.writerow([it + 1, f, repr(float(v)), "real", self.status(f)])
                w.writerow([it + 1, "shadow_max", repr(float(self.shadow_max_history[it])), "shadow", ""])


def binomial_two_sided(k: int, n: int) -> float:
    """Two-sided p-value of ``k`` successes in ``n`` fair coin flips."""
    lower = stats.binom.cdf(k, n, 0.5)
    upper = stats.binom.sf(k - 1, n, 0.5)
    return float(min(1.0, 2.0 * min(lower, upper)))


def _importance(config: BorutaConfig, X: np.ndarray, y: np.ndarray, seed: int, rng) -> np.ndarray:
    fit_rows = eval_rows = np.arange(len(X))
    if config.importance_source == "shap" and config.holdout_fraction is not None:
        perm = rng.permutation(len(X))
        n_eval = max(1, int(round(config.holdout_fraction * len(X))))
        eval_rows, fit_rows = np.sort(perm[:n_eval]), np.sort(perm[n_eval:])
    try:
        Xf, yf = X[fit_rows], y[fit_rows]
        if config.model == "forest":
            model = fit_forest(Xf, yf, config.tree_params, config.n_estimators, seed=seed)
        else:
            model = fit_gbdt(Xf, yf, config.learning_rate, config.n_estimators, config.tree_params, seed=seed)
    except Exception as exc:  # noqa: BLE001
        raise ModelFitFailure(f"Boruta model fit failed: {exc}") from exc
    if config.importance_source == "gain":
        return gain_importance(model)
    if config.shap_rows is not None and len(eval_rows) > config.shap_rows:
        eval_rows = np.sort(rng.choice(eval_rows, config.shap_rows, replace=False))
    return np.abs(tree_shap(model, X[eval_rows]).shap_values).mean(axis=0)


def run_boruta(table: FeatureTable, config: BorutaConfig | None = None) -> BorutaVerdict:
    config = config or BorutaConfig()
    if table.n_rows < MIN_ROWS:
        raise TooFewRows(f"Boruta needs at least {MIN_ROWS} rows, got {table.n_rows}")
    if table.n_features < 2:
        raise ValueError("Boruta needs at least 2 features")
    X = np.asarray(table.matrix)
    y = np.asarray(table.target)
    names = table.feature_names
    m = len(names)
    status = np.zeros(m, dtype=np.int8)  # 0 undecided, 1 accepted, -1 rejected
    hits = np.zeros(m, dtype=np.int64)
    decided_at: dict[str, int] = {}
    history = []
    shadow_max = []
    rng = np.random.default_rng(config.seed)

    it = 0
    while it < config.max_iterations:
        undecided = np.flatnonzero(status == 0)
        if len(undecided) == 0:
            break
        it += 1
        active = np.flatnonzero(status >= 0)
        source = undecided if config.shadow_policy == "undecided" else active
        shadows = np.column_stack([rng.permutation(X[:, f]) for f in source])
        # Split ties go to the lower column index, so columns are shuffled
        # to keep real features from systematically beating their shadows.
        cols = rng.permutation(len(active) + len(source))
        Xa = np.ascontiguousarray(np.hstack([X[:, active], shadows])[:, cols])
        imp = np.empty(len(cols))
        imp[cols] = _importance(config, Xa, y, int(rng.integers(2**32)), rng)
        real, shadow = imp[: len(active)], imp[len(active):]
        smax = float(shadow.max())
        row = np.full(m, np.nan)
        row[active] = real
        history.append(row)
        shadow_max.append(smax)
        hits[undecided] += row[undecided] > smax

        if it >= config.min_iterations:
            threshold = config.alpha / len(undecided)
            for f in undecided:
                k = int(hits[f])
                if binomial_two_sided(k, it) < threshold:
                    status[f] = 1 if 2 * k > it else -1
                    decided_at[names[f]] = it
        log.debug(
            "boruta iteration %d: %d accepted, %d rejected, %d undecided",
            it, (status == 1).sum(), (status == -1).sum(), (status == 0).sum(),
        )

    return BorutaVerdict(
        feature_names=names,
        accepted=tuple(names[i] for i in range(m) if status[i] == 1),
        rejected=tuple(names[i] for i in range(m) if status[i] == -1),
        tentative=tuple(names[i] for i in range(m) if status[i] == 0),
        hit_counts={names[i]: int(hits[i]) for i in range(m)},
        iterations_run=it,
        importance_history=np.array(history).reshape(it, m),
        shadow_max_history=np.array(shadow_max),
        decided_at=decided_at,
    )
