import pytest

from sdlformer._alloc import tune_allocator


def pytest_configure(config):
    tune_allocator()


@pytest.fixture
def rng():
    import numpy as np
    return np.random.default_rng(1234)
