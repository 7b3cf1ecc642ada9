"""SHAP explanations, partial dependence and their exports."""

from .exports import (
    BEESWARM_COLUMNS,
    DEPENDENCE_COLUMNS,
    PDP_COLUMNS,
    ForceRecord,
    PdpCurve,
    beeswarm_data,
    force_data,
    mean_abs_importance,
    pdp,
    percentile_ranks,
    quantile_grid,
    shap_dependence,
    write_rows,
)
from .shap import (
    Explanation,
    brute_force_shap,
    conditional_expectation,
    expected_value,
    tree_expectation,
    tree_shap,
)

__all__ = [
    "BEESWARM_COLUMNS",
    "DEPENDENCE_COLUMNS",
    "PDP_COLUMNS",
    "Explanation",
    "ForceRecord",
    "PdpCurve",
    "beeswarm_data",
    "brute_force_shap",
    "conditional_expectation",
    "expected_value",
    "force_data",
    "mean_abs_importance",
    "pdp",
    "percentile_ranks",
    "quantile_grid",
    "shap_dependence",
    "tree_expectation",
    "tree_shap",
    "write_rows",
]
