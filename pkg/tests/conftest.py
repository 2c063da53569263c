import numpy as np
import pytest
from hypothesis import settings

from anderson_lab.spectral import build_phi

settings.register_profile("lab", max_examples=40, deadline=None)
settings.load_profile("lab")


@pytest.fixture(scope="session")
def tables():
    """Full-size density-of-states table shared across modules."""
    return build_phi(10_000_000, 0.01, seed=1, timestamp="pinned")


@pytest.fixture(scope="session")
def small_tables():
    return build_phi(1_000_000, 0.01, seed=2, timestamp="pinned")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_CRITERIA: list[str] = []


@pytest.fixture(scope="session")
def criterion():
    """Records one verdict line per acceptance criterion; lines are echoed at the end of the run."""

    def record(number: int, name: str, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        _CRITERIA.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
