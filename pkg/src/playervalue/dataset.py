"""Player attribute tables: CSV loading, cleaning, value capping and splitting.

Column names follow the Sofifa extract with spaces replaced by underscores
(``Heading_Accuracy``, ``FK_Accuracy`` ...).  The five goalkeeper attributes
use the ``GK_`` prefix.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateSplit, EmptyResult, MalformedRow, MissingColumn, UnknownFeature

OUTFIELD_FEATURES = (
    "Crossing",
    "Finishing",
    "Heading_Accuracy",
    "Short_Passing",
    "Volleys",
    "Dribbling",
    "Curve",
    "FK_Accuracy",
    "Long_Passing",
    "Ball_Control",
    "Acceleration",
    "Sprint_Speed",
    "Agility",
    "Reactions",
    "Balance",
    "Shot_Power",
    "Jumping",
    "Stamina",
    "Strength",
    "Long_Shots",
    "Aggression",
    "Interceptions",
    "Positioning",
    "Vision",
    "Penalties",
    "Composure",
    "Defensive_Awareness",
    "Standing_Tackle",
    "Sliding_Tackle",
)
GOALKEEPER_FEATURES = (
    "GK_Diving",
    "GK_Handling",
    "GK_Kicking",
    "GK_Positioning",
    "GK_Reflexes",
)
META_COLUMNS = ("name", "overall_rating", "potential", "value", "wage")
FULL_SCHEMA = META_COLUMNS + OUTFIELD_FEATURES + GOALKEEPER_FEATURES
OUTFIELD_SCHEMA = ("name", "value") + OUTFIELD_FEATURES
GOALKEEPER_SCHEMA = ("name", "value") + GOALKEEPER_FEATURES

SKILL_RANGE = (1, 99)
DEFAULT_VALUE_CAP = 25_000_000

_SKILL_COLUMNS = frozenset(OUTFIELD_FEATURES + GOALKEEPER_FEATURES)
_INT_COLUMNS = frozenset(("overall_rating", "potential", "value", "wage")) | _SKILL_COLUMNS


@dataclass(frozen=True)
class PlayerRecord:
    name: str
    value: int | None
    wage: int | None = None
    overall_rating: int | None = None
    potential: int | None = None
    attributes: Mapping[str, int | None] = field(default_factory=dict)
    row_index: int = 0

    @property
    def is_goalkeeper(self) -> bool:
        return all(self.attributes.get(c) is not None for c in GOALKEEPER_FEATURES)


@dataclass(frozen=True)
class PlayerRecordSet:
    """Parsed rows plus the cells that were blank or failed to parse."""

    records: tuple[PlayerRecord, ...]
    columns: tuple[str, ...]
    missing_cells: tuple[tuple[int, str], ...] = ()
    path: str | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)


class FeatureTable:
    """Named-column numeric matrix with an aligned target and row ids.

    Instances are immutable: the arrays are stored read-only, and every
    transforming method returns a new table.  ``row_ids`` defaults to the
    row positions ``"0", "1", ...``.
    """

    __slots__ = ("feature_names", "matrix", "target", "row_ids")

    def __init__(self, feature_names, matrix, target, row_ids=None):
        feature_names = tuple(str(f) for f in feature_names)
        matrix = np.array(matrix, dtype=np.float64, copy=True)
        if matrix.ndim == 1 and len(feature_names) == 0:
            matrix = matrix.reshape(-1, 0)
        if matrix.ndim != 2:
            raise ValueError("matrix must be two-dimensional")
        target = np.array(target, dtype=np.float64, copy=True).reshape(-1)
        if row_ids is None:
            row_ids = range(matrix.shape[0])
        row_ids = tuple(str(r) for r in row_ids)
        if matrix.shape[1] != len(feature_names):
            raise ValueError(
                f"{len(feature_names)} feature names for {matrix.shape[1]} columns"
            )
        if not (matrix.shape[0] == len(target) == len(row_ids)):
            raise ValueError(
                f"row count mismatch: matrix {matrix.shape[0]}, target {len(target)}, "
                f"row_ids {len(row_ids)}"
            )
        dupes = [f for f, c in Counter(feature_names).items() if c > 1]
        if dupes:
            raise ValueError(f"duplicate feature names: {dupes}")
        matrix.setflags(write=False)
        target.setflags(write=False)
        object.__setattr__(self, "feature_names", feature_names)
        object.__setattr__(self, "matrix", matrix)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "row_ids", row_ids)

    def __setattr__(self, name, value):
        raise AttributeError("FeatureTable is immutable")

    def __repr__(self) -> str:
        return f"FeatureTable(n_rows={self.n_rows}, n_features={self.n_features})"

    def __len__(self) -> int:
        return self.n_rows

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureTable):
            return NotImplemented
        return (
            self.feature_names == other.feature_names
            and self.row_ids == other.row_ids
            and np.array_equal(self.matrix, other.matrix, equal_nan=True)
            and np.array_equal(self.target, other.target, equal_nan=True)
        )

    @property
    def n_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_features(self) -> int:
        return self.matrix.shape[1]

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise UnknownFeature(name) from None

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.feature_index(name)]

    def take(self, indices) -> "FeatureTable":
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureTable(
            self.feature_names,
            self.matrix[idx],
            self.target[idx],
            [self.row_ids[i] for i in idx],
        )

    def select(self, features: Sequence[str]) -> "FeatureTable":
        cols = [self.feature_index(f) for f in features]
        return FeatureTable(features, self.matrix[:, cols], self.target, self.row_ids)

    def with_target(self, target) -> "FeatureTable":
        return FeatureTable(self.feature_names, self.matrix, target, self.row_ids)

    def with_matrix(self, matrix) -> "FeatureTable":
        return FeatureTable(self.feature_names, matrix, self.target, self.row_ids)

    def has_missing(self) -> bool:
        return bool(np.isnan(self.matrix).any() or np.isnan(self.target).any())

    def to_csv(self, path, id_column: str = "name", target_column: str = "value") -> None:
        """Write the table as ``id, features..., target`` with exact float text."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow([id_column, *self.feature_names, target_column])
            for rid, row, t in zip(self.row_ids, self.matrix, self.target):
                writer.writerow([rid, *(format_number(v) for v in row), format_number(t)])

    @classmethod
    def from_csv(
        cls,
        path,
        id_column: str = "name",
        target_column: str = "value",
        features: Sequence[str] | None = None,
    ) -> "FeatureTable":
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise MissingColumn(id_column, path=str(path))
            for col in (id_column, target_column):
                if col not in header:
                    raise MissingColumn(col, path=str(path))
            if features is None:
                features = [c for c in header if c not in (id_column, target_column)]
            for f in features:
                if f not in header:
                    raise MissingColumn(f, path=str(path))
            pos = {c: i for i, c in enumerate(header)}
            rows, ids, target = [], [], []
            for i, line in enumerate(reader):
                if not line:
                    continue
                if len(line) != len(header):
                    raise MalformedRow(i, len(header), len(line), path=str(path))
                ids.append(line[pos[id_column]])
                target.append(parse_float(line[pos[target_column]]))
                rows.append([parse_float(line[pos[f]]) for f in features])
        matrix = np.array(rows, dtype=np.float64).reshape(len(rows), len(features))
        return cls(features, matrix, target, ids)


@dataclass(frozen=True)
class SplitPair:
    train: FeatureTable
    test: FeatureTable
    seed: int


def format_number(v: float) -> str:
    if math.isnan(v):
        return ""
    if float(v).is_integer() and abs(v) < 2**53:
        return str(int(v))
    return repr(float(v))


def parse_float(text: str) -> float:
    text = text.strip()
    if not text:
        return math.nan
    try:
        return float(text)
    except ValueError:
        return math.nan


def _parse_int(text: str) -> int | None:
    text = text.strip()
    if not text:
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        v = float(text)
    except ValueError:
        return None
    if not math.isfinite(v) or not v.is_integer():
        return None
    return int(v)


def load_csv(path, schema: Sequence[str] = OUTFIELD_SCHEMA) -> PlayerRecordSet:
    """Read a player CSV.

    Every column in ``schema`` must be present in the header.  Other known
    columns (see ``FULL_SCHEMA``) are read when present.  Blank cells, cells
    that do not parse as integers, and skill scores outside 1-99 are stored
    as ``None`` and listed in ``missing_cells``, except blank goalkeeper
    attributes, which are optional.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise MissingColumn(schema[0] if schema else "name", path=str(path))
        header = [h.strip() for h in header]
        for col in schema:
            if col not in header:
                raise MissingColumn(col, path=str(path))
        pos = {c: i for i, c in enumerate(header)}
        known = [c for c in FULL_SCHEMA if c in pos and c != "name"]

        records = []
        missing = []
        for i, line in enumerate(reader):
            if not line or (len(line) == 1 and not line[0].strip()):
                continue
            if len(line) != len(header):
                raise MalformedRow(i, len(header), len(line), path=str(path))
            parsed: dict[str, int | None] = {}
            for col in known:
                v = _parse_int(line[pos[col]])
                if v is not None and col in _SKILL_COLUMNS and not (
                    SKILL_RANGE[0] <= v <= SKILL_RANGE[1]
                ):
                    v = None
                # goalkeeper attributes are optional, so only garbage counts
                if v is None and not (col in GOALKEEPER_FEATURES and not line[pos[col]].strip()):
                    missing.append((i, col))
                parsed[col] = v
            attrs = {c: parsed.get(c) for c in OUTFIELD_FEATURES + GOALKEEPER_FEATURES if c in pos}
            records.append(
                PlayerRecord(
                    name=line[pos["name"]].strip() if "name" in pos else f"row{i}",
                    value=parsed.get("value"),
                    wage=parsed.get("wage"),
                    overall_rating=parsed.get("overall_rating"),
                    potential=parsed.get("potential"),
                    attributes=attrs,
                    row_index=i,
                )
            )
    return PlayerRecordSet(tuple(records), tuple(header), tuple(missing), str(path))


def _unique_ids(names: Iterable[str]) -> list[str]:
    seen: Counter = Counter()
    out = []
    for n in names:
        seen[n] += 1
        out.append(n if seen[n] == 1 else f"{n}#{seen[n]}")
    return out


def _records_to_table(records: Sequence[PlayerRecord], features: Sequence[str]) -> FeatureTable:
    matrix = np.array(
        [
            [math.nan if r.attributes.get(f) is None else r.attributes[f] for f in features]
            for r in records
        ],
        dtype=np.float64,
    ).reshape(len(records), len(features))
    target = np.array([r.value for r in records], dtype=np.float64)
    return FeatureTable(features, matrix, target, _unique_ids(r.name for r in records))


def clean_and_partition(
    records: PlayerRecordSet | Sequence[PlayerRecord], impute: bool = False
) -> tuple[FeatureTable, FeatureTable]:
    """Split records into outfield and goalkeeper tables.

    A record is a goalkeeper iff all five goalkeeper attributes are present.
    Rows without a positive ``value`` are always dropped.  Rows with a
    missing modeled attribute are dropped unless ``impute`` is set, in which
    case they are kept with NaN cells for a later ``MeanImputer``.

    Raises
    ------
    EmptyResult
        If no row survives.
    """
    outfield, keepers = [], []
    for r in records:
        if r.value is None or r.value <= 0:
            continue
        if r.is_goalkeeper:
            keepers.append(r)
            continue
        cells = [r.attributes.get(f) for f in OUTFIELD_FEATURES]
        if all(c is None for c in cells):
            continue
        if not impute and any(c is None for c in cells):
            continue
        outfield.append(r)
    if not outfield and not keepers:
        raise EmptyResult("every record was dropped during cleaning")
    return (
        _records_to_table(outfield, OUTFIELD_FEATURES),
        _records_to_table(keepers, GOALKEEPER_FEATURES),
    )


def drop_incomplete(table: FeatureTable) -> FeatureTable:
    """Remove rows with any NaN cell or a non-positive/NaN target."""
    keep = ~np.isnan(table.matrix).any(axis=1) & (table.target > 0)
    return table.take(np.flatnonzero(keep))


def cap_value(table: FeatureTable, threshold: float = DEFAULT_VALUE_CAP) -> FeatureTable:
    """Drop rows whose target strictly exceeds ``threshold``; order is kept."""
    return table.take(np.flatnonzero(~(table.target > threshold)))


def train_test_split(table: FeatureTable, test_fraction: float = 0.2, seed: int = 0) -> SplitPair:
    """Seeded uniform random split; both sides keep the input row order."""
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n = table.n_rows
    n_test = int(math.floor(n * test_fraction + 0.5))
    if n_test == 0 or n_test == n:
        raise DegenerateSplit(
            f"{n} rows with test_fraction={test_fraction} leaves an empty side"
        )
    perm = np.random.default_rng(seed).permutation(n)
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    return SplitPair(table.take(train_idx), table.take(test_idx), seed)


@dataclass(frozen=True)
class MeanImputer:
    """Column means fitted on one table and applied to others."""

    means: Mapping[str, float]

    @classmethod
    def fit(cls, table: FeatureTable) -> "MeanImputer":
        means = {}
        for j, name in enumerate(table.feature_names):
            col = table.matrix[:, j]
            ok = ~np.isnan(col)
            means[name] = float(col[ok].mean()) if ok.any() else 0.0
        return cls(means)

    def transform(self, table: FeatureTable) -> FeatureTable:
        m = np.array(table.matrix)
        for j, name in enumerate(table.feature_names):
            col = m[:, j]
            col[np.isnan(col)] = self.means[name]
        return table.with_matrix(m)
