import numpy as np
import pytest

from molcomm import _pure

try:
    from molcomm import _speedups
except ImportError:  # extension not built
    _speedups = None

BACKENDS = [pytest.param(_pure, id="python")]
if _speedups is not None:
    BACKENDS.insert(0, pytest.param(_speedups, id="cython"))


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
