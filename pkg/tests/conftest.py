import math

import hypothesis
import pytest

from optoforce.params import DerivedParams, PhysicalParams, derive_couplings


hypothesis.settings.register_profile("default", max_examples=60, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def table1() -> PhysicalParams:
    return PhysicalParams()


@pytest.fixture
def d1(table1) -> DerivedParams:
    return derive_couplings(table1)


@pytest.fixture
def toy() -> DerivedParams:
    """Moderate couplings and a drive only 10x faster than the slow scale, so RK4 runs are cheap."""
    return DerivedParams.from_couplings(chi=3.0, theta=5.0, gamma=0.4, Omega=40.0, nbar=0.0)


def slow_period(d: DerivedParams) -> float:
    return 2 * math.pi / d.omega
