"""Acceptance battery: every criterion at its stated tolerance.

The suite runs once per session; each criterion is then its own test and
prints a single ``[PASS]``/``[FAIL]`` line to the terminal.
"""

import pytest

from broken_sobolev.acceptance import CRITERIA, run_suite

NUMBERS = list(range(1, 10))


@pytest.fixture(scope="session")
def suite_results():
    return {r.number: r for r in run_suite(seed=0)}


@pytest.mark.slow
@pytest.mark.parametrize("number", NUMBERS)
def test_criterion(number, suite_results, capsys):
    res = suite_results[number]
    with capsys.disabled():
        print("\n" + res.line())
    assert res.passed, res.line() + f" detail={res.detail}"


@pytest.mark.slow
def test_every_criterion_ran(suite_results):
    assert sorted(suite_results) == NUMBERS
    assert set(CRITERIA) == set(NUMBERS) - {9}


@pytest.mark.slow
def test_sabotaged_jump_weight_is_caught(capsys):
    # weighting jumps by |e| instead of 1/|e| must break the stability criteria
    results = run_suite(seed=0, sabotage=True, only=[2, 3, 5])
    with capsys.disabled():
        for r in results:
            print("\n[sabotage] " + r.line())
    assert all(not r.passed for r in results)
