import os

import numpy as np
import pytest

from plateflow.model import PlateProblem, make_benchmark


def pytest_collection_modifyitems(config, items):
    if os.environ.get("PLATEFLOW_STRESS") == "1":
        return
    skip = pytest.mark.skip(reason="stress test; set PLATEFLOW_STRESS=1 to run")
    for item in items:
        if "stress" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(scope="session")
def small_problems():
    """Each benchmark on a coarse mesh (at most 128 elements)."""
    return {
        "kirchhoff": PlateProblem(make_benchmark("kirchhoff"), 4, 4),
        "bilayer": PlateProblem(make_benchmark("bilayer"), 8, 4),
        "prestrained": PlateProblem(make_benchmark("prestrained", c=0.1), 8, 4),
    }


def random_field(problem, rng, scale=1.0, respect_bc=True):
    v = scale * rng.standard_normal(problem.space.ndof)
    if respect_bc:
        v[problem.space.dirichlet] = 0.0
    return v


# -- acceptance report --------------------------------------------------------

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
