import numpy as np
import pytest

from boundseg import backend


@pytest.fixture
def each_backend(request):
    """Parametrized fixture value is the active backend name; restores the
    previous selection afterwards."""
    previous = backend.active_backend()
    backend.set_backend(request.param)
    yield request.param
    backend.set_backend(previous)


def pytest_generate_tests(metafunc):
    if "each_backend" in metafunc.fixturenames:
        names = [b for b in backend.BACKENDS
                 if b != "numba" or backend.numba_available()]
        metafunc.parametrize("each_backend", names, indirect=True)


def brute_knn(points: np.ndarray, center: int, k: int):
    """Independent O(N) scan per query: full stable sort on (d2, index)."""
    diff = points - points[center]
    d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2
    d2[center] = np.inf
    order = np.lexsort((np.arange(len(points)), d2))[:k]
    return order, np.sqrt(d2[order])
