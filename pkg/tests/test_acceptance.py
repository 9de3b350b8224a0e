"""Acceptance gate: the eleven numbered criteria at their stated tolerances.

Run with ``pytest tests/test_acceptance.py -s`` (or ``geoforms selftest``)
to see one pass/fail line per criterion.
"""

from functools import lru_cache

import pytest

from geoforms.acceptance import CRITERIA, format_line, run_one

# Criterion 4 compares the fifth form with a first-order operator formula
# whose printed sign disagrees with the definition; see the decisions ledger.
KNOWN_FAILURES = {4}

_LINES = pytest.StashKey[dict]()


@lru_cache(maxsize=None)
def result(n):
    return run_one(n)


@pytest.mark.parametrize("n", sorted(CRITERIA))
def test_criterion(n, request):
    crit = result(n)
    line = format_line(crit)
    print(line)
    request.config.stash.setdefault(_LINES, {})[n] = line
    if n in KNOWN_FAILURES:
        if crit.passed:
            pytest.fail(f"criterion {n} passed unexpectedly; update KNOWN_FAILURES")
        pytest.xfail(line)
    assert crit.passed, line


def test_known_failure_is_only_the_sign_of_the_operator_formula():
    crit = result(4)
    failing = [c.name for c in crit.failing()]
    assert failing == ["max |FF5 - O1 formula|"]
    reversed_sign = float(crit.checks[[c.name for c in crit.checks].index("max |FF5 - O1 formula|")]
                          .note.rsplit(" ", 1)[-1])
    assert reversed_sign <= 1e-8


def test_zz_summary_table(request):
    lines = request.config.stash.get(_LINES, {})
    table = "\n".join(lines[n] for n in sorted(lines))
    reporter = request.config.pluginmanager.get_plugin("terminalreporter")
    if reporter is not None:
        reporter.write_line("")
        reporter.write_line("acceptance criteria:")
        for ln in table.splitlines():
            reporter.write_line("  " + ln)
    assert len(lines) == len(CRITERIA)


if __name__ == "__main__":
    for n in sorted(CRITERIA):
        print(format_line(result(n)))
