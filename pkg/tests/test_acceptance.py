"""Every acceptance criterion at its stated tolerance, one PASS/FAIL line each.

The lines are printed (visible with ``-s``) and repeated in the terminal
summary by ``conftest.py``.
"""

import pytest

from timeflat.acceptance import CRITERIA, run_criterion

LINES = []
_CACHE = {}


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    # criteria run in order so the resolution check reuses the base-grid results
    res = run_criterion(number, cache=_CACHE)
    line = res.line()
    LINES.append(line)
    print(line)
    assert res.passed, line
