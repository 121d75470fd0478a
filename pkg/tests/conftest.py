import numpy as np
import pytest

from histroads.types import GeoTransform


@pytest.fixture
def tr():
    return GeoTransform(600000.0, 200000.0, 1.25)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = {}


class _Recorder:
    def __init__(self, store):
        self.store = store

    def record(self, n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        self.store[n] = line
        print(line)
        return ok


@pytest.fixture(scope="session")
def acceptance():
    return _Recorder(_ACCEPTANCE)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[n])
