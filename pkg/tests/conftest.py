from pathlib import Path

import numpy as np
import pytest

from morpipe.activesubspace import BoxDomain
from morpipe.pipeline import BuiltinAdapter, SamplingPlan, run_offline
from morpipe.testbeds import PoissonConfig

DATA = Path(__file__).parent / "data"
CONFIGS = Path(__file__).resolve().parents[1] / "configs"


@pytest.fixture
def rng():
    return np.random.default_rng(20181205)


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def configs_dir():
    return CONFIGS


POISSON_BOX = BoxDomain([0.3, 0.3], [0.7, 0.7])
POISSON_CFG = PoissonConfig(g=32, width=0.25, probe=(0.4, 0.6))


@pytest.fixture(scope="session")
def poisson_adapter():
    return BuiltinAdapter("poisson", POISSON_CFG)


@pytest.fixture(scope="session")
def poisson_db20(poisson_adapter):
    plan = SamplingPlan(POISSON_BOX, 20, "lhs", seed=11)
    return run_offline(plan, poisson_adapter, jobs=1, names=("a", "b"))


@pytest.fixture(scope="session")
def poisson_db40(poisson_adapter):
    plan = SamplingPlan(POISSON_BOX, 40, "lhs", seed=7)
    return run_offline(plan, poisson_adapter, jobs=1, names=("a", "b")), plan


# one summary line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
