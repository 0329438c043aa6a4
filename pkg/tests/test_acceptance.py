"""Acceptance gate: one PASS/FAIL line per criterion, full sample sizes."""

import pytest

from fracwave.acceptance import CRITERIA

pytestmark = pytest.mark.acceptance


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    res = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + res.line(), flush=True)
    assert res.passed, res.line()
