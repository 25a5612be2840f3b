"""Acceptance criteria, one suite per criterion.

Each check prints a PASS/FAIL line (visible in ``pytest -v`` output), followed by
a one-line verdict for the whole criterion.  The same suites run from the
command line with ``nematic verify <suite>`` or ``nematic verify all``.
"""
import pytest

from nematic.acceptance import SUITES


@pytest.mark.slow
@pytest.mark.parametrize("suite", list(SUITES))
def test_acceptance(suite, capsys):
    checks = SUITES[suite]()
    assert checks
    criterion = checks[0].criterion
    passed = all(c.passed for c in checks)
    with capsys.disabled():
        print()
        for check in checks:
            print(check.line())
        print(f"criterion {criterion} ({suite}): {'PASS' if passed else 'FAIL'}")
    failing = [c.line() for c in checks if not c.passed]
    assert not failing, "\n".join(failing)
