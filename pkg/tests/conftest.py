import csv
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from playervalue.dataset import FULL_SCHEMA, GOALKEEPER_FEATURES, OUTFIELD_FEATURES  # noqa: E402


def player_row(name, value, skill=50, keeper=False, **overrides):
    row = {c: "" for c in FULL_SCHEMA}
    row.update(name=name, overall_rating=70, potential=75, value=value, wage=1000)
    for f in OUTFIELD_FEATURES:
        row[f] = skill
    if keeper:
        for f in GOALKEEPER_FEATURES:
            row[f] = skill
    row.update(overrides)
    return row


def write_csv(path, rows, columns=FULL_SCHEMA):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# (criterion, passed, detail) triples filled in by test_acceptance.py
ACCEPTANCE_RESULTS: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS, key=lambda r: int(r[0][2:])):
        terminalreporter.write_line(f"{name} {'PASS' if ok else 'FAIL'}: {detail}")
