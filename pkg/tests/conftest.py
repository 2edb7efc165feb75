import math

import pytest
from scipy import integrate


def chi2_density(t, df):
    return math.exp((df / 2 - 1) * math.log(t) - t / 2 - (df / 2) * math.log(2) - math.lgamma(df / 2))


def chi2_tail_by_quadrature(x, df):
    """Upper tail of chi-square by integrating the density from x to infinity."""
    if x == 0.0:
        return 1.0
    value, _ = integrate.quad(
        chi2_density, x, math.inf, args=(df,), epsabs=1e-14, epsrel=1e-13, limit=200
    )
    return value


@pytest.fixture
def chi2_oracle():
    return chi2_tail_by_quadrature


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    """Record a one-line verdict; lines are echoed in the terminal summary."""

    def record(criterion, passed, detail):
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
