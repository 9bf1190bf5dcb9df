"""One test per acceptance criterion, each printing a PASS/FAIL line.

The thresholds live in ``lowmem_dealers.checks`` (shared with ``verify``);
the oracles below recompute the reference numbers independently.
"""
import math

import pytest

from conftest import ACCEPTANCE_LINES
from lowmem_dealers import checks


def report(res):
    line = res.line()
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert res.passed, line


def test_harmonic_oracle():
    # float summation from the small end, independent of the exact fraction sum
    h = math.fsum(1 / i for i in range(1024, 0, -1))
    assert h == pytest.approx(7.5093, abs=2e-4)  # quoted to four places
    assert checks.harmonic(1024) == pytest.approx(h, rel=1e-15)


def test_bracket_oracle():
    lo, hi = checks.predictability_bracket(4096, 64)
    assert lo == 32 and round(hi) == round(5 * (64 + math.log(128))) == 344


def test_chi_square_criticals():
    # the fixed bound of criterion 2 is slightly stricter than the exact 1e-4 critical value
    assert 180 < checks.critical(119) < 186


def test_codec_length_oracle():
    # ceil(log2 16!) from the gamma function, not from the integer factorial
    assert math.ceil(math.lgamma(17) / math.log(2)) == 45


@pytest.mark.parametrize("number", sorted(checks.CHECKS))
def test_criterion(number):
    report(checks.CHECKS[number]())
