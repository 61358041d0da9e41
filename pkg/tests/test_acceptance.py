"""End-to-end acceptance criteria; each prints one PASS/FAIL line."""
from __future__ import annotations

import pytest

from subcount.acceptance import CRITERIA

pytestmark = pytest.mark.acceptance

REPORT: list[str] = []


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    res = CRITERIA[number](0)
    REPORT.append(res.line())
    print(res.line())
    assert res.passed, res.line(verbose=True)
