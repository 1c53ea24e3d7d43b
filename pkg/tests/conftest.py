import numpy as np
import pytest

from slabrad.greens import LayerStack
from slabrad.modes import SlabSpec

LAMBDA0 = 980e-9
N_CORE = 3.5
WIDTH = 200e-9
LAMBDA = LAMBDA0 / N_CORE


@pytest.fixture(scope="session")
def stack():
    return LayerStack.symmetric(N_CORE, WIDTH, LAMBDA0)


@pytest.fixture(scope="session")
def slab_spec():
    return SlabSpec(N_CORE, WIDTH, LAMBDA0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
