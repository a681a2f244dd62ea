import sys

import numpy as np
import pytest

from rdinstab import example2, scalar_example


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scalar_unstable():
    return scalar_example(0.0, -1.0)


@pytest.fixture
def scalar_stable():
    return scalar_example(-2.0, -1.0)


@pytest.fixture
def ex2():
    return example2()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
