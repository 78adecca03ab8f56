"""Acceptance suite: every numbered criterion at its stated tolerance.

Each test prints one PASS/FAIL line; the lines are repeated in a summary
section at the end of the pytest run. Run standalone with
``python tests/test_acceptance.py`` for the lines alone.
"""

import pytest

from ioncrystal.acceptance import CRITERIA, run_all, run_criterion

RESULTS = []


@pytest.mark.slow
@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = run_criterion(number)
    RESULTS.append(result)
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()


if __name__ == "__main__":
    import sys

    sys.exit(0 if all(r.passed for r in run_all()) else 1)
