import numpy as np
import pytest
from hypothesis import strategies as st

from merws.model import derive_params


@st.composite
def valid_triples(draw, max_d=6):
    """(d, p, r) with r in (0, 1) and an implied q in [0, 1]."""
    d = draw(st.integers(1, max_d))
    r = draw(st.floats(1e-6, 1 - 1e-6))
    p = draw(st.floats(0.0, 1.0 - r))
    return d, p, r


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def diffusive():
    return derive_params(2, 0.4, 0.2)


@pytest.fixture(scope="session")
def critical():
    return derive_params(2, 0.5, 0.2)


@pytest.fixture(scope="session")
def superdiffusive():
    return derive_params(2, 0.9, 0.05)


# pass/fail lines of the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
