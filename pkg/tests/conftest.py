import numpy as np
import pytest

from specsense import Rng


@pytest.fixture
def rng():
    return Rng(12345)


class FixedUniform:
    """Generator stub whose ``uniform`` always returns the lower bound."""

    def uniform(self, low=0.0, high=1.0, size=None):
        return low if size is None else np.full(size, low)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
