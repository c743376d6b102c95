import numpy as np
import pytest

from perfshift.scenarios import get_scenario
from perfshift.scm import OFF, DomainSetting, IDEAL_EXAMPLE1

GRID = np.linspace(0.0, 1.0, 101)


@pytest.fixture
def off():
    return DomainSetting(0, OFF)


@pytest.fixture
def ideal():
    return DomainSetting(1, IDEAL_EXAMPLE1)


@pytest.fixture(scope="session")
def example1():
    return get_scenario("example1")


@pytest.fixture(scope="session")
def randomized():
    return get_scenario("example1_randomized")


@pytest.fixture(scope="session")
def explore():
    return get_scenario("example1_explore")


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
