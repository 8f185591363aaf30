import numpy as np
import pytest

from gammafisher import Grid, analyze, double_well, harmonic

# acceptance lines collected by tests/test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sym():
    return double_well()


@pytest.fixture(scope="session")
def tilted():
    return double_well(tilt=0.25)


@pytest.fixture(scope="session")
def ou():
    return harmonic()


@pytest.fixture(scope="session")
def sym_report(sym):
    return analyze(sym)


@pytest.fixture(scope="session")
def tilted_report(tilted):
    return analyze(tilted)


@pytest.fixture(scope="session")
def ou_report(ou):
    return analyze(ou)


@pytest.fixture(scope="session")
def line_grid():
    return Grid([[-3.0, 3.0]], [4001])


@pytest.fixture(scope="session")
def tilted_roots():
    """Critical points of (x^2-1)^2 + x/4 from the cubic 4x^3 - 4x + 1/4 = 0."""
    r = np.sort(np.roots([4.0, 0.0, -4.0, 0.25]).real)
    V = lambda x: (x * x - 1) ** 2 + 0.25 * x
    d2 = lambda x: 12 * x * x - 4
    return {"x": r, "V": V(r), "d2": d2(r)}
