import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from slnwitness.cases import CASES
from slnwitness.geometry import reduce_to_independent
from slnwitness.physics import joint_table

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


class AcceptanceRecorder:
    def __init__(self, lines: list):
        self._lines = lines

    def check(self, number: int, title: str, ok: bool, detail: str = "") -> None:
        tag = "PASS" if ok else "FAIL"
        line = f"[{tag}] criterion {number:>2}: {title}" + (f" | {detail}" if detail else "")
        self._lines.append(line)
        print(line)
        assert ok, line

    def info(self, number: int, title: str, detail: str) -> None:
        line = f"[INFO] criterion {number:>2}: {title} | {detail}"
        self._lines.append(line)
        print(line)


@pytest.fixture
def acceptance(request):
    return AcceptanceRecorder(request.config.stash[_LINES])


@pytest.fixture(scope="session")
def case_vectors():
    return {name: reduce_to_independent(joint_table(c.params)) for name, c in CASES.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
