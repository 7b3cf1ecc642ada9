"""Pipeline configuration: a YAML file, overridable key by key.

Every key is optional; omitted keys take the defaults in ``DEFAULTS``.
Nested keys are addressed with dots when overriding (``boruta.alpha=0.01``).
"""

from __future__ import annotations

import copy
import itertools
import os
from pathlib import Path

import yaml

from .dataset import DEFAULT_VALUE_CAP
from .errors import ConfigError
from .trees import FAMILY_DEFAULTS, check_params

OUTPUT_DIR_ENV = "PLAYERVALUE_OUTPUT_DIR"
FALLBACK_OUTPUT_DIR = "playervalue-out"

DEFAULTS: dict = {
    "input": None,                 # player CSV (required by prepare)
    "schema": "outfield",          # outfield | goalkeeper
    "value_cap": DEFAULT_VALUE_CAP,  # rows valued strictly above are dropped; null disables
    "test_fraction": 0.2,
    "seed": 1,
    "impute": False,               # keep rows with missing skills and mean-impute them
    "output_dir": None,            # default: $PLAYERVALUE_OUTPUT_DIR, else ./playervalue-out
    "boruta": {
        "enabled": True,
        "max_iterations": 100,
        "alpha": 0.05,
        "importance_source": "shap",  # shap | gain
        "model": "forest",            # forest | gbdt
        "n_estimators": 100,
        "max_depth": 6,
        "min_samples_split": 3,
        "min_samples_leaf": 3,
        "feature_subsample": None,    # null: ceil(sqrt(M)) per split
        "learning_rate": 0.1,
        "shap_rows": 250,
        "holdout_fraction": 0.3,      # SHAP rows held out from each fit; null fits and explains all rows
        "shadow_policy": "active",    # active | undecided: which features get shadows
        "include_tentative": False,
    },
    "model": {
        "family": "gbdt",          # gbdt | forest
        "params": {},              # fixed parameters overlaying the family defaults
    },
    "grid": {                      # axes searched by `tune`, first axis varies slowest
        "learning_rate": [0.05, 0.1],
        "max_depth": [3, 4],
        "n_estimators": [900],
    },
    "cv": {
        "k": 5,
        "metric_scale": "euro",    # euro | transformed
        "criterion": "r2",         # r2 | rmse
    },
    "explain": {
        "data": "test",            # test | train
        "max_rows": 500,           # rows explained (seeded sample when larger)
        "top_k": 9,
        "grid_size": 50,
        "force_rows": 3,           # first N explained rows get force records
        "svg": True,
    },
}

_CHOICES = {
    "schema": ("outfield", "goalkeeper"),
    "boruta.importance_source": ("shap", "gain"),
    "boruta.model": ("forest", "gbdt"),
    "boruta.shadow_policy": ("active", "undecided"),
    "model.family": tuple(FAMILY_DEFAULTS),
    "cv.metric_scale": ("euro", "transformed"),
    "cv.criterion": ("r2", "rmse"),
    "explain.data": ("test", "train"),
}


def _merge(base: dict, update: dict, prefix: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in update.items():
        dotted = f"{prefix}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {dotted!r}")
        # free-form mappings are replaced wholesale
        if isinstance(base[key], dict) and dotted not in ("model.params", "grid"):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {dotted!r} must be a mapping")
            out[key] = _merge(base[key], value, dotted + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_override(text: str) -> dict:
    """``"a.b=value"`` to ``{"a": {"b": value}}`` with YAML-typed ``value``."""
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
    out: dict = value
    for part in reversed(key.strip().split(".")):
        out = {part: out}
    return out


def _get(cfg: dict, dotted: str):
    for part in dotted.split("."):
        cfg = cfg[part]
    return cfg


def validate(cfg: dict) -> dict:
    for key, allowed in _CHOICES.items():
        if _get(cfg, key) not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {_get(cfg, key)!r}")
    if not 0 < cfg["test_fraction"] < 1:
        raise ConfigError("test_fraction must be in (0, 1)")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        raise ConfigError("seed must be an integer")
    if cfg["value_cap"] is not None and not cfg["value_cap"] > 0:
        raise ConfigError("value_cap must be positive or null")
    if not isinstance(cfg["cv"]["k"], int) or cfg["cv"]["k"] < 2:
        raise ConfigError("cv.k must be an integer >= 2")
    grid = cfg["grid"]
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid must be a nonempty mapping of axis -> value list")
    for axis, values in grid.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"grid axis {axis!r} must be a nonempty list")
    family = cfg["model"]["family"]
    allowed = set(FAMILY_DEFAULTS[family])
    for key in list(cfg["model"]["params"]) + list(grid):
        if key not in allowed:
            raise ConfigError(f"{key!r} is not a {family} parameter; expected one of {sorted(allowed)}")
    for combo in itertools.product(*grid.values()):
        params = {**cfg["model"]["params"], **dict(zip(grid, combo))}
        try:
            check_params(family, params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid model parameters {params}: {exc}") from exc
    return cfg


def load_config(path=None, overrides: list[dict] | None = None) -> dict:
    """Defaults, then the YAML file at ``path``, then each override mapping."""
    cfg = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML in {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping")
        cfg = _merge(cfg, data)
    for o in overrides or []:
        cfg = _merge(cfg, o)
    if cfg["output_dir"] is None:
        cfg["output_dir"] = os.environ.get(OUTPUT_DIR_ENV) or FALLBACK_OUTPUT_DIR
    return validate(cfg)


def snapshot(cfg: dict) -> dict:
    """The config as embedded in reports; ``output_dir`` is left out so runs
    into different directories produce identical reports."""
    snap = copy.deepcopy(cfg)
    snap.pop("output_dir", None)
    return snap


def dump_default_config() -> str:
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
