"""Versioned JSON dump of a fitted tree ensemble.

Layout (``format_version`` 1)::

    {
      "format": "playervalue.tree-ensemble",
      "format_version": 1,
      "family": "gbdt" | "forest",
      "feature_names": [...],
      "offset": <base score, 0 for forests>,
      "scale": <learning rate, 1/T for forests>,
      "params": {...},            # family-specific fit parameters
      "boxcox": {"lambda", "shift", "log_likelihood"} | null,
      "metadata": {...},          # free-form (seed, config snapshot ...)
      "node_fields": ["id", "feature", "threshold", "left", "right",
                      "cover", "value", "gain"],
      "trees": [[[0, 3, 61.5, 1, 2, 800, 13.1, 42.0], ...], ...]
    }

Every tree is a list of nodes in id order.  Leaves carry ``null`` for
feature, threshold, left and right.  Prediction is
``offset + scale * sum(leaf values)``.  Floats are written with ``repr`` so
a reload predicts bit-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..transform import BoxCoxParams
from .cart import RegressionTree, TreeParams
from .ensemble import GbdtModel, RandomForestModel

FORMAT = "playervalue.tree-ensemble"
FORMAT_VERSION = 1
NODE_FIELDS = ("id", "feature", "threshold", "left", "right", "cover", "value", "gain")


@dataclass
class ModelArtifact:
    model: GbdtModel | RandomForestModel
    feature_names: tuple[str, ...]
    boxcox: BoxCoxParams | None = None
    metadata: dict = field(default_factory=dict)


def _num(v: float):
    v = float(v)
    return int(v) if v.is_integer() and abs(v) < 2**53 else v


def tree_to_nodes(tree: RegressionTree) -> list[list]:
    nodes = []
    for i in range(tree.n_nodes):
        if tree.feature[i] < 0:
            nodes.append([i, None, None, None, None, _num(tree.cover[i]), float(tree.value[i]), 0.0])
        else:
            nodes.append([
                i,
                int(tree.feature[i]),
                float(tree.threshold[i]),
                int(tree.left[i]),
                int(tree.right[i]),
                _num(tree.cover[i]),
                float(tree.value[i]),
                float(tree.gain[i]),
            ])
    return nodes


def tree_from_nodes(nodes: list[list], n_features: int) -> RegressionTree:
    n = len(nodes)
    feature = np.full(n, -1, np.int64)
    threshold = np.zeros(n)
    left = np.full(n, -1, np.int64)
    right = np.full(n, -1, np.int64)
    value = np.zeros(n)
    cover = np.zeros(n)
    gain = np.zeros(n)
    for node in nodes:
        i, f, t, l, r, c, v, g = node
        if f is not None:
            feature[i], threshold[i], left[i], right[i] = f, t, l, r
        cover[i], value[i], gain[i] = c, v, g
    return RegressionTree(feature, threshold, left, right, value, cover, gain, n_features)


def _params(model) -> dict:
    p = {"tree_params": model.tree_params.to_dict(), "seed": int(model.seed)}
    if model.family == "gbdt":
        p.update(learning_rate=model.learning_rate, n_estimators=model.n_estimators)
    else:
        p.update(n_estimators=model.n_estimators, bootstrap=bool(model.bootstrap))
    return p


def artifact_to_dict(art: ModelArtifact) -> dict:
    m = art.model
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "family": m.family,
        "feature_names": list(art.feature_names),
        "offset": float(m.offset),
        "scale": float(m.scale),
        "params": _params(m),
        "boxcox": art.boxcox.to_dict() if art.boxcox else None,
        "metadata": art.metadata,
        "node_fields": list(NODE_FIELDS),
        "trees": [tree_to_nodes(t) for t in m.trees],
    }


def artifact_from_dict(d: dict) -> ModelArtifact:
    if d.get("format") != FORMAT:
        raise ValueError(f"not a model artifact (format={d.get('format')!r})")
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format_version {d.get('format_version')!r}")
    if list(d["node_fields"]) != list(NODE_FIELDS):
        raise ValueError(f"unexpected node_fields {d['node_fields']}")
    names = tuple(d["feature_names"])
    trees = tuple(tree_from_nodes(nodes, len(names)) for nodes in d["trees"])
    p = d["params"]
    tp = TreeParams(**p["tree_params"])
    if d["family"] == "gbdt":
        model = GbdtModel(d["offset"], d["scale"], trees, len(names), tp, p["seed"])
    elif d["family"] == "forest":
        model = RandomForestModel(trees, len(names), p["bootstrap"], p["seed"], tp)
    else:
        raise ValueError(f"unknown model family {d['family']!r}")
    box = BoxCoxParams.from_dict(d["boxcox"]) if d.get("boxcox") else None
    return ModelArtifact(model, names, box, d.get("metadata", {}))


def dumps(art: ModelArtifact) -> str:
    """Pretty JSON with one node per line."""
    d = artifact_to_dict(art)
    trees = d.pop("trees")
    head = json.dumps(d, indent=2, sort_keys=True)
    tree_txt = ",\n".join(
        "    [\n" + ",\n".join("      " + json.dumps(n) for n in nodes) + "\n    ]"
        for nodes in trees
    )
    body = '  "trees": [\n' + tree_txt + "\n  ]" if trees else '  "trees": []'
    return head[:-2] + ",\n" + body + "\n}\n"


def loads(text: str) -> ModelArtifact:
    return artifact_from_dict(json.loads(text))


def save_model(path, art: ModelArtifact) -> None:
    Path(path).write_text(dumps(art), encoding="utf-8")


def load_model(path) -> ModelArtifact:
    return loads(Path(path).read_text(encoding="utf-8"))
