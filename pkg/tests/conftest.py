import numpy as np
import pytest

from crossnoise import _pykernels

try:
    from crossnoise import _ckernels
except ImportError:  # extension not built
    _ckernels = None

KERNEL_BACKENDS = [pytest.param(_pykernels, id="python")]
KERNEL_BACKENDS.append(
    pytest.param(_ckernels, id="cython", marks=pytest.mark.skipif(_ckernels is None, reason="extension not built"))
)


@pytest.fixture(params=KERNEL_BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


# -- acceptance reporting ----------------------------------------------------

ACCEPTANCE_RESULTS = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title = number, title
        self.details = []

    def note(self, text):
        self.details.append(text)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        detail = "; ".join(self.details)
        ACCEPTANCE_RESULTS[self.number] = f"[{status}] criterion {self.number}: {self.title}" + (f" ({detail})" if detail else "")
        print(ACCEPTANCE_RESULTS[self.number])
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_RESULTS):
            terminalreporter.write_line(ACCEPTANCE_RESULTS[number])
