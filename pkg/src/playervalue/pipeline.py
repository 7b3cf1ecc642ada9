"""End-to-end stages: prepare, select, tune, train-eval, explain, predict.

Stages communicate only through files in the output directory::

    prepare     -> train.csv, test.csv, boxcox.json, prepare.json
    select      -> boruta.json, boruta_history.csv
    tune        -> grid.csv, tune.json
    train-eval  -> model.json, metrics.json
    explain     -> explain/ (importance, beeswarm, force, pdp, dependence)
    predict     -> predictions CSV

``select`` and ``tune`` read ``train.csv`` only; ``test.csv`` is first read
by ``train-eval`` for final scoring.  Every JSON report embeds the config
snapshot and seed.  ``manifest.json`` records checksums and timings.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .config import snapshot
from .dataset import (
    FeatureTable,
    MeanImputer,
    cap_value,
    clean_and_partition,
    load_csv,
    parse_float,
    train_test_split,
)
from .errors import ConfigError, EmptyResult, MalformedRow, SchemaMismatch, UsageError
from .evaltune import GridSpec, ModelSpec, cross_validate, fit_pipeline, grid_search
from .explain import (
    BEESWARM_COLUMNS,
    DEPENDENCE_COLUMNS,
    PDP_COLUMNS,
    beeswarm_data,
    force_data,
    mean_abs_importance,
    pdp,
    shap_dependence,
    tree_shap,
    write_rows,
)
from .explain import svg
from .selection import BorutaConfig, run_boruta
from .transform import fit_lambda, inverse
from .trees import TreeParams
from .trees.io import ModelArtifact, load_model, save_model

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
TRAIN_CSV, TEST_CSV = "train.csv", "test.csv"


def _out(cfg: dict) -> Path:
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise UsageError(f"{path} not found; run `{stage}` first")
    return path


def write_json(path, report: str, cfg: dict | None, body: dict) -> None:
    d = {"report": report, "schema_version": SCHEMA_VERSION, **body}
    if cfg is not None:
        d["config"] = snapshot(cfg)
        d["seed"] = cfg["seed"]
    Path(path).write_text(json.dumps(_clean(d), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@contextmanager
def _stage(cfg: dict, name: str, outputs: list):
    """Time a stage and record checksums of the paths appended to ``outputs``."""
    t0 = time.perf_counter()
    yield
    out = _out(cfg)
    path = out / "manifest.json"
    manifest = read_json(path) if path.exists() else {"report": "manifest", "stages": {}}
    files = {}
    for p in outputs:
        p = Path(p)
        for f in sorted(p.rglob("*")) if p.is_dir() else [p]:
            if f.is_file():
                files[f.relative_to(out).as_posix()] = sha256(f)
    manifest.update(
        schema_version=SCHEMA_VERSION,
        software_version=__version__,
        config=snapshot(cfg),
        seed=cfg["seed"],
    )
    manifest["stages"][name] = {"seconds": round(time.perf_counter() - t0, 3), "outputs": files}
    path.write_text(json.dumps(_clean(manifest), indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- prepare -----------------------------------------------------------------


def prepare(cfg: dict) -> dict:
    """Clean, cap and split the input; fit Box-Cox on the training targets."""
    if not cfg["input"]:
        raise UsageError("no input CSV configured (set `input` or pass --input)")
    out = _out(cfg)
    outputs = [out / TRAIN_CSV, out / TEST_CSV, out / "boxcox.json", out / "prepare.json"]
    with _stage(cfg, "prepare", outputs):
        records = load_csv(cfg["input"])
        outfield, keepers = clean_and_partition(records, impute=cfg["impute"])
        table = outfield if cfg["schema"] == "outfield" else keepers
        n_clean = table.n_rows
        if cfg["value_cap"] is not None:
            table = cap_value(table, cfg["value_cap"])
        if table.n_rows == 0:
            raise EmptyResult(
                f"no {cfg['schema']} rows left after cleaning and the value cap "
                f"({n_clean} before the cap) in {cfg['input']}"
            )
        split = train_test_split(table, cfg["test_fraction"], cfg["seed"])
        split.train.to_csv(out / TRAIN_CSV)
        split.test.to_csv(out / TEST_CSV)
        box = fit_lambda(split.train.target)
        write_json(out / "boxcox.json", "boxcox", cfg, {"boxcox": box.to_dict()})
        summary = {
            "input_rows": len(records),
            "missing_cells": len(records.missing_cells),
            "outfield_rows": outfield.n_rows,
            "goalkeeper_rows": keepers.n_rows,
            "rows_after_cap": table.n_rows,
            "train_rows": split.train.n_rows,
            "test_rows": split.test.n_rows,
            "features": list(table.feature_names),
        }
        write_json(out / "prepare.json", "prepare", cfg, {"summary": summary})
    log.info("prepare: %d train / %d test rows", split.train.n_rows, split.test.n_rows)
    return summary


def _train(cfg: dict) -> FeatureTable:
    return FeatureTable.from_csv(_require(_out(cfg) / TRAIN_CSV, "prepare"))


# -- select ------------------------------------------------------------------


def boruta_config(cfg: dict) -> BorutaConfig:
    b = cfg["boruta"]
    try:
        tp = TreeParams(b["max_depth"], b["min_samples_split"], b["min_samples_leaf"], b["feature_subsample"])
        return BorutaConfig(
            max_iterations=b["max_iterations"],
            alpha=b["alpha"],
            importance_source=b["importance_source"],
            model=b["model"],
            n_estimators=b["n_estimators"],
            tree_params=tp,
            learning_rate=b["learning_rate"],
            shap_rows=b["shap_rows"],
            holdout_fraction=b["holdout_fraction"],
            shadow_policy=b["shadow_policy"],
            seed=cfg["seed"],
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid boruta settings: {exc}") from exc


def select(cfg: dict) -> list[str]:
    """Run Boruta on the training table; returns the downstream feature list."""
    out = _out(cfg)
    with _stage(cfg, "select", [out / "boruta.json", out / "boruta_history.csv"]):
        train = _train(cfg)
        if cfg["impute"]:
            train = MeanImputer.fit(train).transform(train)
        include = cfg["boruta"]["include_tentative"]
        if cfg["boruta"]["enabled"]:
            verdict = run_boruta(train, boruta_config(cfg))
            selected = list(verdict.selected(include_tentative=include))
            body = {"verdict": verdict.to_dict()}
            verdict.write_history_csv(out / "boruta_history.csv")
        else:
            selected = list(train.feature_names)
            body = {"verdict": None}
            write_rows(out / "boruta_history.csv", [], ("iteration", "feature", "importance", "kind", "final_status"))
        body.update(selected_features=selected, include_tentative=include)
        # the verdict is written even when nothing survives, so it can be inspected
        write_json(out / "boruta.json", "boruta", cfg, body)
        if not selected:
            raise EmptyResult("feature selection kept no features; see boruta.json "
                              "(include_tentative or more iterations may help)")
    log.info("select: %d of %d features kept", len(selected), train.n_features)
    return selected


def selected_features(cfg: dict) -> list[str]:
    return read_json(_require(_out(cfg) / "boruta.json", "select"))["selected_features"]


# -- tune --------------------------------------------------------------------


def tune(cfg: dict) -> dict:
    """Grid search on the training table restricted to the selected features."""
    out = _out(cfg)
    with _stage(cfg, "tune", [out / "grid.csv", out / "tune.json"]):
        train = _train(cfg).select(selected_features(cfg))
        grid = GridSpec(cfg["model"]["family"], {k: list(v) for k, v in cfg["grid"].items()})
        result = grid_search(
            grid,
            train,
            k=cfg["cv"]["k"],
            seed=cfg["seed"],
            metric_scale=cfg["cv"]["metric_scale"],
            criterion=cfg["cv"]["criterion"],
            impute=cfg["impute"],
            base_params=cfg["model"]["params"],
        )
        result.write_csv(out / "grid.csv")
        best = {**cfg["model"]["params"], **result.best_params}
        write_json(out / "tune.json", "tune", cfg, {"best_params": best, "search": result.to_dict()})
    log.info("tune: best %s", best)
    return best


# -- train-eval --------------------------------------------------------------


def _model_params(cfg: dict) -> tuple[dict, str]:
    path = _out(cfg) / "tune.json"
    if path.exists():
        return read_json(path)["best_params"], "tune"
    return dict(cfg["model"]["params"]), "config"


def train_eval(cfg: dict) -> dict:
    """CV the chosen model on train, refit on all of train, score on test."""
    out = _out(cfg)
    with _stage(cfg, "train-eval", [out / "model.json", out / "metrics.json"]):
        features = selected_features(cfg)
        train = _train(cfg).select(features)
        params, source = _model_params(cfg)
        spec = ModelSpec(cfg["model"]["family"], params, True, cfg["impute"], cfg["seed"])
        cv = cross_validate(spec, train, cfg["cv"]["k"], cfg["seed"], cfg["cv"]["metric_scale"])
        fitted = fit_pipeline(spec, train)
        meta = {"config": snapshot(cfg), "seed": cfg["seed"], "params_source": source}
        if fitted.imputer is not None:
            meta["imputer_means"] = dict(fitted.imputer.means)
        save_model(out / "model.json", ModelArtifact(fitted.model, fitted.feature_names, fitted.boxcox, meta))
        # held-out data is read only here, after every fitting step
        test = FeatureTable.from_csv(_require(out / TEST_CSV, "prepare"), features=features)
        test_scores = fitted.score(test)
        train_scores = fitted.score(train)
        body = {
            "model": spec.to_dict(),
            "params_source": source,
            "boxcox": fitted.boxcox.to_dict() if fitted.boxcox else None,
            "features": features,
            "cv": cv.to_dict(),
            "train": {s: r.to_dict() for s, r in train_scores.items()},
            "test": {s: r.to_dict() for s, r in test_scores.items()},
        }
        write_json(out / "metrics.json", "metrics", cfg, body)
    log.info("train-eval: test R2 %.4f (euro), %.4f (transformed)",
             test_scores["euro"].r_squared, test_scores["transformed"].r_squared)
    return body


# -- explain -----------------------------------------------------------------


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "_" for c in name)


def _artifact_table(art: ModelArtifact, table: FeatureTable) -> FeatureTable:
    table = table.select(art.feature_names)
    if "imputer_means" in art.metadata:
        table = MeanImputer(art.metadata["imputer_means"]).transform(table)
    return table


def explain(cfg: dict, model_path=None) -> dict:
    """SHAP importance, beeswarm, force records, PDP and SHAP dependence exports."""
    out = _out(cfg)
    ex = cfg["explain"]
    edir = out / "explain"
    edir.mkdir(exist_ok=True)
    with _stage(cfg, "explain", [edir]):
        art = load_model(model_path or _require(out / "model.json", "train-eval"))
        src = out / (TEST_CSV if ex["data"] == "test" else TRAIN_CSV)
        table = _artifact_table(art, FeatureTable.from_csv(_require(src, "prepare"), features=art.feature_names))
        if table.n_rows > ex["max_rows"]:
            idx = np.sort(np.random.default_rng(cfg["seed"]).choice(table.n_rows, ex["max_rows"], replace=False))
            table = table.take(idx)
        expl = tree_shap(art.model, table.matrix, art.feature_names, table.row_ids)
        ranking = mean_abs_importance(expl)
        top = [name for name, _ in ranking[: ex["top_k"]]]
        draw = ex["svg"]

        write_rows(edir / "importance.csv",
                   [{"rank": i + 1, "feature": f, "mean_abs_shap": s} for i, (f, s) in enumerate(ranking)],
                   ("rank", "feature", "mean_abs_shap"))
        bees = beeswarm_data(expl, ex["top_k"])
        write_rows(edir / "beeswarm.csv", bees, BEESWARM_COLUMNS)
        if draw:
            (edir / "importance.svg").write_text(svg.importance_bars(ranking[: ex["top_k"]]), encoding="utf-8")
            (edir / "beeswarm.svg").write_text(svg.beeswarm(bees), encoding="utf-8")

        fdir = edir / "force"
        fdir.mkdir(exist_ok=True)
        for row in range(min(ex["force_rows"], expl.n_samples)):
            rec = force_data(expl, row, art.boxcox).to_dict()
            stem = f"force_{row:03d}_{_slug(rec['row_id'])}"
            write_json(fdir / f"{stem}.json", "force", cfg, {"force": rec})
            if draw:
                (fdir / f"{stem}.svg").write_text(svg.force_plot(rec), encoding="utf-8")

        pdir = edir / "pdp"
        ddir = edir / "dependence"
        pdir.mkdir(exist_ok=True)
        ddir.mkdir(exist_ok=True)
        for f in top:
            stem = _slug(f)
            curve = pdp(art.model, table, f, ex["grid_size"])
            euro = pdp(art.model, table, f, ex["grid_size"], art.boxcox, scale="euro")
            write_rows(pdir / f"pdp_{stem}.csv", curve.rows() + euro.rows(), PDP_COLUMNS)
            dep = shap_dependence(expl, f)
            write_rows(ddir / f"dependence_{stem}.csv", dep, DEPENDENCE_COLUMNS)
            if draw:
                (pdir / f"pdp_{stem}.svg").write_text(
                    svg.xy_plot(curve.grid, curve.mean_prediction, f"Partial dependence: {f}", f,
                                "mean prediction (transformed)", line=True),
                    encoding="utf-8",
                )
                (ddir / f"dependence_{stem}.svg").write_text(
                    svg.xy_plot([d["feature_value"] for d in dep], [d["shap_value"] for d in dep],
                                f"SHAP dependence: {f}", f, "SHAP value"),
                    encoding="utf-8",
                )
        summary = {
            "data": ex["data"],
            "rows_explained": expl.n_samples,
            "base_value": expl.base_value,
            "importance": [{"feature": f, "mean_abs_shap": s} for f, s in ranking],
            "top_features": top,
            "max_local_accuracy_error": float(np.max(np.abs(expl.predictions - art.model.predict(table.matrix)))),
        }
        write_json(edir / "explain.json", "explain", cfg, summary)
    log.info("explain: %d rows, top features %s", expl.n_samples, top)
    return summary


# -- predict -----------------------------------------------------------------

PREDICTION_COLUMNS = ("row_id", "prediction_transformed", "prediction_euro", "out_of_domain", "missing_features")


def read_prediction_input(path, features) -> tuple[list[str], np.ndarray]:
    """Row ids and the feature matrix of an arbitrary CSV; blank cells are NaN."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        for f in features:
            if f not in header:
                raise SchemaMismatch(f, f"input {path} has no column {f!r} required by the model")
        pos = {c: i for i, c in enumerate(header)}
        ids, rows = [], []
        for i, line in enumerate(reader):
            if not line:
                continue
            if len(line) != len(header):
                raise MalformedRow(i, len(header), len(line), path=str(path))
            ids.append(line[pos["name"]].strip() if "name" in pos else str(i))
            rows.append([parse_float(line[pos[f]]) for f in features])
    return ids, np.array(rows, dtype=np.float64).reshape(len(rows), len(features))


def predict(model_path, input_path, output_path) -> dict:
    """Both-scale predictions for every input row.

    Rows whose transformed prediction has no inverse get an empty euro cell
    and ``out_of_domain=1``; rows with a missing feature (and no stored
    imputer) get empty predictions.
    """
    art = load_model(model_path)
    ids, X = read_prediction_input(input_path, art.feature_names)
    if "imputer_means" in art.metadata:
        means = np.array([art.metadata["imputer_means"][f] for f in art.feature_names])
        X = np.where(np.isnan(X), means, X)
    missing = np.isnan(X).any(axis=1)
    t = np.full(len(ids), np.nan)
    if (~missing).any():
        t[~missing] = art.model.predict(X[~missing])
    e = inverse(t, art.boxcox, errors="nan") if art.boxcox else t.copy()
    ood = ~missing & np.isnan(e)
    with open(output_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PREDICTION_COLUMNS)
        for i, rid in enumerate(ids):
            w.writerow([
                rid,
                "" if np.isnan(t[i]) else repr(float(t[i])),
                "" if np.isnan(e[i]) else repr(float(e[i])),
                int(ood[i]),
                ";".join(f for f, v in zip(art.feature_names, X[i]) if np.isnan(v)),
            ])
    n_ood, n_missing = int(ood.sum()), int(missing.sum())
    if n_ood:
        log.warning("%d row(s) out of the Box-Cox inverse domain; flagged, not clamped", n_ood)
    if n_missing:
        log.warning("%d row(s) with missing features were not predicted", n_missing)
    return {"rows": len(ids), "out_of_domain": n_ood, "missing": n_missing}


def run_all(cfg: dict) -> None:
    prepare(cfg)
    select(cfg)
    tune(cfg)
    train_eval(cfg)
    explain(cfg)
    out = _out(cfg)
    with _stage(cfg, "predict", [out / "predictions.csv"]):
        predict(out / "model.json", out / TEST_CSV, out / "predictions.csv")
