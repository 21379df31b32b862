"""
Shared pytest fixtures
"""

import os
import tempfile

# Configuration is read at import time, so the test environment is selected first
os.environ.setdefault('KDKMEANS_ENV', 'testing')
os.environ.setdefault('LOG_DIR', tempfile.mkdtemp(prefix='kdkmeans-logs-'))

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from core.baseline import LloydState, lloyd_iterate  # noqa: E402
from services.datagen_service import DatasetGenerator, GenSpec  # noqa: E402
from storage.dataset_store import DatasetStore  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def dataset_store():
    return DatasetStore()


@pytest.fixture
def generator(dataset_store):
    return DatasetGenerator(dataset_store)


@pytest.fixture
def clumped(generator):
    """Four tight, well-separated clumps in 3 dimensions"""
    spec = GenSpec(n=1200, dims=3, n_clumps=4, stddev_range=(0.1, 0.2), rng_seed=7)
    return generator.generate(spec)


@pytest.fixture
def make_instance():
    """Factory for small random clustering instances: (points, k)"""
    def factory(seed: int, max_n: int = 200, max_dims: int = 5, max_k: int = 8):
        local = np.random.default_rng(seed)
        k = int(local.integers(1, max_k + 1))
        n = int(local.integers(k, max_n + 1))
        dims = int(local.integers(1, max_dims + 1))
        return local.uniform(-10.0, 10.0, size=(n, dims)), k
    return factory


@pytest.fixture
def assert_lloyd_fixed_point():
    """Checker: one more Lloyd iteration from a final result leaves every assignment unchanged"""
    def check(points, result):
        state = LloydState(centroids=result.centroids, assignments=result.assignments)
        for _ in range(2):
            state, _ = lloyd_iterate(points, state)
            assert np.array_equal(state.assignments, result.assignments)
    return check
