import pytest
from hypothesis import HealthCheck, settings

from bispectral import VariableRegistry

settings.register_profile(
    "fixed",
    derandomize=True,
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("fixed")


@pytest.fixture
def reg2():
    return VariableRegistry(("x1", "x2"), ("z1", "z2"), ("s",))


@pytest.fixture
def reg1():
    return VariableRegistry(("x",), ("z",))


# one line per acceptance criterion, collected by tests/test_acceptance.py
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
