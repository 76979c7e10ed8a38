"""Acceptance gate: the eleven primary criteria at their stated tolerances.

Each criterion prints one PASS/FAIL line straight to the terminal, so the
verdicts show up even when pytest captures output.
"""

import pytest

from hofa.acceptance import CRITERIA, run


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = run(number)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.details
