import xml.etree.ElementTree as ET

import numpy as np

from playervalue.dataset import FULL_SCHEMA, clean_and_partition, load_csv
from playervalue.explain import svg
from playervalue.synth import VALUE_DRIVERS, friedman1, generate_players, write_players


def test_friedman_shape_and_determinism():
    a, b = friedman1(50, seed=2), friedman1(50, seed=2)
    assert a.feature_names == tuple(f"x{j}" for j in range(10))
    np.testing.assert_array_equal(a.matrix, b.matrix)
    np.testing.assert_array_equal(a.target, b.target)
    assert a.matrix.min() >= 0 and a.matrix.max() <= 1


def test_player_corpus_is_schema_complete(tmp_path):
    rows = generate_players(300, seed=4, goalkeeper_fraction=0.2, missing_fraction=0.02)
    assert all(set(r) == set(FULL_SCHEMA) for r in rows)
    write_players(tmp_path / "p.csv", rows)
    outfield, keepers = clean_and_partition(load_csv(tmp_path / "p.csv"))
    assert outfield.n_rows > 150 and keepers.n_rows > 20
    assert np.all(outfield.target > 0)
    assert len(VALUE_DRIVERS) == 22
    assert generate_players(20, seed=4) == generate_players(20, seed=4)


def _parse(text):
    root = ET.fromstring(text)
    assert root.tag.endswith("svg")
    return root


def test_svg_outputs_are_valid_and_stable():
    ranking = [("b", 2.0), ("a&c", 1.0)]
    assert _parse(svg.importance_bars(ranking)) is not None
    assert svg.importance_bars(ranking) == svg.importance_bars(ranking)
    rows = [{"feature": "b", "shap_value": v, "feature_value_percentile": p}
            for v, p in [(0.1, 0.0), (-0.3, 1.0), (0.0, 0.5)]]
    _parse(svg.beeswarm(rows))
    rec = {"row_id": "r1", "base_value": 1.0, "prediction_transformed": 1.5, "prediction_euro": 10.0,
           "contributions": [{"feature": f"f{i}", "shap_value": 0.05 * (-1) ** i} for i in range(15)]}
    text = svg.force_plot(rec)
    _parse(text)
    assert "3 other features" in text
    _parse(svg.xy_plot([1, 2, np.nan], [3, 4, 5], "t", "x", "y", line=True))
    _parse(svg.xy_plot([], [], "empty", "x", "y"))
