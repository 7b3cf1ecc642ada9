"""Synthetic data: Friedman #1 regression and a Sofifa-schema player corpus."""

from __future__ import annotations

import csv

import numpy as np

from .dataset import FULL_SCHEMA, GOALKEEPER_FEATURES, OUTFIELD_FEATURES, FeatureTable

# Attributes that drive value in the generated corpus; the rest are noise.
VALUE_DRIVERS = (
    "Acceleration",
    "Heading_Accuracy",
    "Defensive_Awareness",
    "Vision",
    "Volleys",
    "Sprint_Speed",
    "Long_Passing",
    "Positioning",
    "Standing_Tackle",
    "Dribbling",
    "FK_Accuracy",
    "Short_Passing",
    "Interceptions",
    "Penalties",
    "Finishing",
    "Reactions",
    "Ball_Control",
    "Stamina",
    "Crossing",
    "Strength",
    "Shot_Power",
    "Sliding_Tackle",
)
NOISE_ATTRIBUTES = tuple(f for f in OUTFIELD_FEATURES if f not in VALUE_DRIVERS)

_ATTACK = {"Finishing", "Volleys", "Shot_Power", "Positioning", "Penalties", "Dribbling", "Heading_Accuracy"}
_DEFENCE = {"Defensive_Awareness", "Standing_Tackle", "Sliding_Tackle", "Interceptions", "Strength"}
_PLAYMAKING = {"Vision", "Short_Passing", "Long_Passing", "Crossing", "FK_Accuracy", "Ball_Control"}

# Driver weights for log-value; Reactions/Ball_Control/Short_Passing dominate.
_WEIGHTS = {f: 0.5 for f in VALUE_DRIVERS}
_WEIGHTS.update(
    Ball_Control=2.0, Reactions=2.4, Short_Passing=1.4, Sprint_Speed=1.2,
    Finishing=1.1, Interceptions=1.0, Dribbling=1.0, Sliding_Tackle=0.9, Acceleration=0.9,
)


def friedman1(n: int = 2000, n_features: int = 10, noise: float = 1.0, seed: int = 0) -> FeatureTable:
    """``10 sin(pi x0 x1) + 20 (x2 - .5)^2 + 10 x3 + 5 x4 + N(0, noise^2)``.

    Features are uniform on [0, 1]; columns beyond the fifth are pure noise.
    """
    if n_features < 5:
        raise ValueError("Friedman #1 needs at least 5 features")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, n_features))
    y = (
        10 * np.sin(np.pi * X[:, 0] * X[:, 1])
        + 20 * (X[:, 2] - 0.5) ** 2
        + 10 * X[:, 3]
        + 5 * X[:, 4]
        + noise * rng.normal(size=n)
    )
    return FeatureTable([f"x{j}" for j in range(n_features)], X, y, [f"r{i}" for i in range(n)])


def _position_bias(feature: str, role: int) -> float:
    # role 0 defender, 1 midfielder, 2 forward
    if feature in _ATTACK:
        return (-8.0, 0.0, 8.0)[role]
    if feature in _DEFENCE:
        return (8.0, 0.0, -10.0)[role]
    if feature in _PLAYMAKING:
        return (-3.0, 6.0, 0.0)[role]
    return 0.0


def generate_players(
    n_rows: int = 1000,
    seed: int = 1,
    goalkeeper_fraction: float = 0.1,
    missing_fraction: float = 0.01,
) -> list[dict]:
    """Rows in ``FULL_SCHEMA`` with a heavy-tailed, attribute-driven value.

    Roughly 3% of outfield values exceed EUR 25M; values span about
    EUR 15k to 190M.  Outfield rows leave the goalkeeper columns blank.
    """
    rng = np.random.default_rng(seed)
    wsum = sum(_WEIGHTS.values())
    rows = []
    for i in range(n_rows):
        keeper = rng.random() < goalkeeper_fraction
        quality = rng.normal()
        role = int(rng.integers(0, 3))
        attrs: dict[str, int | None] = {}
        for f in OUTFIELD_FEATURES:
            if f in VALUE_DRIVERS:
                mu = 58 + 9.0 * quality + _position_bias(f, role)
                if keeper:
                    mu = 25 + 4.0 * quality
                v = mu + rng.normal(0, 6.0)
            else:
                v = rng.normal(55 if not keeper else 35, 12.0)
            attrs[f] = int(np.clip(np.rint(v), 1, 99))
        for f in GOALKEEPER_FEATURES:
            attrs[f] = int(np.clip(np.rint(62 + 9.0 * quality + rng.normal(0, 5.0)), 1, 99)) if keeper else None

        if keeper:
            score = np.mean([(attrs[f] - 62) / 9.0 for f in GOALKEEPER_FEATURES])
        else:
            score = sum(
                _WEIGHTS[f] * (attrs[f] - 58 - _position_bias(f, role)) / 9.0 for f in VALUE_DRIVERS
            ) / wsum
            score += 0.2 * max(0.0, (attrs["Reactions"] - 70) / 10.0) ** 2
            score += 0.15 * ((attrs["Sprint_Speed"] - 58) / 9.0) * ((attrs["Ball_Control"] - 58) / 9.0)
        log_value = 13.25 + 1.5 * score + rng.normal(0, 0.3)
        value = int(np.clip(np.rint(np.exp(log_value) / 1000.0) * 1000, 15_000, 190_000_000))

        if not keeper and rng.random() < missing_fraction:
            attrs[OUTFIELD_FEATURES[int(rng.integers(len(OUTFIELD_FEATURES)))]] = None

        overall = int(np.clip(np.rint(65 + 7 * quality), 40, 94))
        rows.append(
            {
                "name": f"Player {i:05d}",
                "overall_rating": overall,
                "potential": min(95, overall + int(rng.integers(0, 11))),
                "value": value,
                "wage": max(500, int(round(value / 250.0, -2))),
                **attrs,
            }
        )
    return rows


def write_players(path, rows: list[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FULL_SCHEMA)
        for r in rows:
            w.writerow(["" if r.get(c) is None else r[c] for c in FULL_SCHEMA])
