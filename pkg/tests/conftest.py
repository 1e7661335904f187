import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("sarcv", max_examples=60, deadline=None)
settings.load_profile("sarcv")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
