import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ggs.data import SyntheticSpec, generate_synthetic

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def benchmark0():
    """The 25-dimensional, 10-segment benchmark series (seed 0) and its true breakpoints."""
    ds, truth, covs = generate_synthetic(SyntheticSpec(seed=0))
    return ds.ts, truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def report_criterion(request):
    """Record one PASS/FAIL line per acceptance criterion, echoed in the summary."""
    lines = request.config.__dict__.setdefault("_ggs_acceptance", [])

    def record(name, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.__dict__.get("_ggs_acceptance")
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
