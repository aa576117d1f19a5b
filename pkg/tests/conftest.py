import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from cocycle_lab import analytic as an
from cocycle_lab.cocycle import CocycleParams
from cocycle_lab.freq import continued_fraction

settings.register_profile("lab", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def golden():
    return continued_fraction("golden", 20)


@pytest.fixture(scope="session")
def amo(golden):
    """Almost Mathieu, lambda = 5, E = 0."""
    return CocycleParams(an.constant(1.0), an.amo_potential(5.0), 0.0, golden)


@pytest.fixture(scope="session")
def harper(golden):
    """Extended Harper weight (0.5, 1.0, 0.3) with v = 2 cos, E = 0.3."""
    return CocycleParams(an.harper_weight(0.5, 1.0, 0.3, float(golden)), an.amo_potential(1.0), 0.3, golden)


@pytest.fixture(scope="session")
def complex_jacobi(golden):
    """Complex weight 1.5 + 0.5 i e(x) with v = 2 cos + cos(4 pi x), E = -0.7."""
    a = an.AnalyticObservable(np.array([0, 1]), np.array([1.5, 0.5j]))
    v = an.AnalyticObservable(np.array([-2, -1, 1, 2]), np.array([0.5, 1.0, 1.0, 0.5], dtype=complex))
    return CocycleParams(a, v, -0.7, golden)


@pytest.fixture(scope="session")
def free(golden):
    """v = 0, a = 1, E = 0."""
    return CocycleParams(an.constant(1.0), an.constant(0.0), 0.0, golden)


@pytest.fixture
def rng():
    return np.random.default_rng(20260101)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is not None and mod.LINES:
        terminalreporter.section("acceptance criteria")
        for line in mod.LINES:
            terminalreporter.write_line(line)
