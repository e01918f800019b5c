import numpy as np
import pytest

from dsqft.geometry import ModelParams, unit


@pytest.fixture(scope="session")
def p4():
    """d = 4 with frak_m^2 = 2: mu = 0, closed-form modes."""
    return ModelParams.from_frak_m(4, frak_m2=2.0)


@pytest.fixture(scope="session")
def p6():
    """d = 6 with frak_m = 3: principal series."""
    return ModelParams.from_frak_m(6, frak_m=3.0)


@pytest.fixture(scope="session")
def p5():
    return ModelParams.from_frak_m(5, frak_m=3.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def north(d):
    return unit(d)


ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        parts = ACCEPTANCE_LINES[k]
        ok = all(p[0] for p in parts)
        detail = "; ".join(p[1] for p in parts)
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
