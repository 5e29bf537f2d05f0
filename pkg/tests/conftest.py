import numpy as np
import pytest

from osclab.scenarios import get_scenario

ACCEPTANCE = {}


def pytest_configure(config):
    config._acceptance = ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def record():
    """Record one acceptance line: ``record(number, passed, detail)``."""
    def _record(number, passed, detail=""):
        ACCEPTANCE[number] = (bool(passed), detail)
    return _record


@pytest.fixture(scope="session")
def flat_sine():
    return get_scenario("flat_sine")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
