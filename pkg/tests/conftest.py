import numpy as np
import pytest
from hypothesis import settings

from dlqg.filtering import filter_pass
from dlqg.model import benchmark_problem
from dlqg.riccati import riccati_backward

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def example():
    return benchmark_problem()


@pytest.fixture(scope="session")
def example_passes(example):
    return riccati_backward(example), filter_pass(example)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
