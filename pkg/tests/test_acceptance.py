"""One-shot acceptance suite: one line per criterion, each checked at its stated tolerance.

The suite is run once per session; every criterion is its own test so a failing
criterion shows up as a failing test instead of hiding the others.
"""
import pytest

from condlab.acceptance import CRITERIA, run_suite

from conftest import ACCEPTANCE_LINES


@pytest.fixture(scope="module")
def results():
    out = {r.number: r for r in run_suite(echo=ACCEPTANCE_LINES.append)}
    for line in ACCEPTANCE_LINES:
        print(line)
    return out


def test_all_criteria_reported(results):
    assert sorted(results) == sorted(CRITERIA) + [10]


@pytest.mark.parametrize("number", list(range(1, 11)))
def test_criterion(results, number):
    r = results[number]
    assert r.passed, r.line()
