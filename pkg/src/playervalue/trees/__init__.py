from .cart import RegressionTree, TreeParams, fit_tree, predict_tree
from .ensemble import (
    FAMILY_DEFAULTS,
    FOREST_DEFAULT_TREE_PARAMS,
    FOREST_DEFAULTS,
    GBDT_DEFAULT_TREE_PARAMS,
    GBDT_DEFAULTS,
    GbdtModel,
    PackedTrees,
    RandomForestModel,
    check_params,
    fit_forest,
    fit_gbdt,
    fit_regressor,
    gain_importance,
    pack_trees,
    predict_gbdt,
    resolve_params,
)

__all__ = [
    "FAMILY_DEFAULTS",
    "FOREST_DEFAULTS",
    "FOREST_DEFAULT_TREE_PARAMS",
    "GBDT_DEFAULTS",
    "GBDT_DEFAULT_TREE_PARAMS",
    "GbdtModel",
    "PackedTrees",
    "RandomForestModel",
    "RegressionTree",
    "TreeParams",
    "check_params",
    "fit_forest",
    "fit_gbdt",
    "fit_regressor",
    "fit_tree",
    "gain_importance",
    "pack_trees",
    "predict_gbdt",
    "predict_tree",
    "resolve_params",
]
