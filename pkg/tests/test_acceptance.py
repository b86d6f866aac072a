"""Acceptance suite: sixteen numerical criteria at their stated tolerances.

The first fifteen are computed once per session; the sixteenth reruns the
whole suite with the same seed and compares the serialized results byte
for byte.  A pass/fail line per criterion is printed in the terminal
summary (and to stdout when run with ``-s``).
"""

import time

import pytest

from thermoplate.acceptance import CRITERIA, determinism_check, run_suite
from thermoplate.io import dumps

from conftest import ACCEPTANCE_LINES

SEED = 0


@pytest.fixture(scope="module")
def first_run():
    start = time.perf_counter()
    results = {r.number: r for r in run_suite(SEED)}
    return start, results


def _report(result):
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)


@pytest.mark.parametrize("number,name", [(n, name) for n, name, _, _ in CRITERIA],
                         ids=[f"{n:02d}-{name.replace(' ', '-')}" for n, name, _, _ in CRITERIA])
def test_criterion(first_run, number, name):
    res = first_run[1][number]
    _report(res)
    assert res.error is None, res.error
    assert res.passed, res.measured
    assert res.within_budget, f"{res.elapsed:.1f}s exceeds {res.budget}s"


def test_criterion_16_determinism(first_run):
    start, results = first_run
    again = run_suite(SEED)
    a = dumps([r.to_dict() for r in sorted(results.values(), key=lambda r: r.number)])
    b = dumps([r.to_dict() for r in again])
    res = determinism_check(a.encode(), b.encode(), time.perf_counter() - start)
    _report(res)
    assert res.passed
    assert res.within_budget
