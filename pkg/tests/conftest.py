import numpy as np
import pytest
from hypothesis import settings

from recurrent_pvar.process import Sample

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def dataset_a() -> Sample:
    """Observed design: subject 1 event at 1, C=4; subject 2 event at 2, C=2."""
    return Sample("observed", [4.0, 2.0], [0, 1], [1.0, 2.0])


def dataset_b() -> Sample:
    """Censored design: (1 event at 0.5, C~=1, D~=1), (no events, C~=2, D~=0), (event 1.5, C~=3, D~=1)."""
    return Sample("censored", [1.0, 2.0, 3.0], [0, 2], [0.5, 1.5], status=[1, 0, 1])


@pytest.fixture
def sample_a():
    return dataset_a()


@pytest.fixture
def sample_b():
    return dataset_b()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"CRITERION {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
