import numpy as np
import pytest
from hypothesis import strategies as st

from stratasim import Classifier

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def simplex(n: int):
    """Hypothesis strategy for strictly positive weights on the n-simplex."""
    return st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n).map(lambda v: np.asarray(v) / np.sum(v))


@st.composite
def classifiers(draw, n=2):
    theta = draw(simplex(n))
    theta0 = draw(st.floats(-5.0, 5.0))
    return Classifier(theta, theta0)


@pytest.fixture
def c64():
    """The 2-D running example: theta = (0.6, 0.4), theta0 = 1."""
    return Classifier(np.array([0.6, 0.4]), 1.0)
