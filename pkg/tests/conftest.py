import numpy as np
import pytest

from agingdict import kernels
from agingdict.synthetic import make_planted


@pytest.fixture(params=sorted(kernels.BACKENDS))
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_planted():
    return make_planted(f=256, G=4, k=8, m=16, n=20, sparsity=2, noise=0.0, seed=7)


def unit_columns(rng, m, k):
    D = rng.standard_normal((m, k))
    return D / np.linalg.norm(D, axis=0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[number])
