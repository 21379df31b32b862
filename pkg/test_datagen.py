"""
Tests for synthetic dataset generation
"""

import json
import os

import numpy as np
import pytest

from config import Constants
from core.errors import ClusteringError
from core.geometry import BoundingBox
from services.datagen_service import GenSpec, GroundTruth, truth_path


class TestGenSpec:

    @pytest.mark.parametrize('kwargs', [
        {'n': 3, 'dims': 2, 'n_clumps': 4},
        {'n': 10, 'dims': 2, 'n_clumps': 0},
        {'n': 10, 'dims': 0, 'n_clumps': 1},
        {'n': 10, 'dims': 2, 'n_clumps': 1, 'stddev_range': (0.0, 1.0)},
        {'n': 10, 'dims': 2, 'n_clumps': 1, 'stddev_range': (2.0, 1.0)},
        {'n': 10, 'dims': 2, 'n_clumps': 1, 'domain_box': BoundingBox((0, 0, 0), (1, 1, 1))},
    ])
    def test_invalid(self, kwargs):
        """Invalid generator settings are rejected"""
        with pytest.raises(ClusteringError):
            GenSpec(**kwargs)

    def test_clump_sizes(self):
        """The remainder goes to the earlier clumps"""
        assert GenSpec(n=10, dims=2, n_clumps=3).clump_sizes() == [4, 3, 3]


class TestDatasetGenerator:

    def test_degenerate_noise(self, generator):
        """Tiny stddev puts every point on its clump mean"""
        spec = GenSpec(n=200, dims=3, n_clumps=1, stddev_range=(1e-12, 1e-12), rng_seed=4)
        points, truth = generator.generate(spec)
        assert points.shape == (200, 3)
        assert np.all(np.abs(points - truth.means[0]) <= 1e-9)

    def test_deterministic(self, generator):
        """The same seed generates the same dataset"""
        spec = GenSpec(n=500, dims=4, n_clumps=5, rng_seed=21)
        first, truth_a = generator.generate(spec)
        second, truth_b = generator.generate(spec)
        assert np.array_equal(first, second)
        assert np.array_equal(truth_a.labels, truth_b.labels)

    def test_seed_changes_dataset(self, generator):
        """Different seeds generate different datasets"""
        a, _ = generator.generate(GenSpec(n=50, dims=2, n_clumps=2, rng_seed=1))
        b, _ = generator.generate(GenSpec(n=50, dims=2, n_clumps=2, rng_seed=2))
        assert not np.array_equal(a, b)

    def test_sample_statistics(self, generator):
        """Sample mean and stddev match the clump parameters"""
        spec = GenSpec(n=10_000, dims=3, n_clumps=1, stddev_range=(2.0, 2.0), rng_seed=0)
        points, truth = generator.generate(spec)
        assert np.all(np.abs(points.mean(axis=0) - truth.means[0]) <= 4 * (2.0 / 100))
        assert np.all(np.abs(points.std(axis=0) - 2.0) <= 0.05 * 2.0)

    def test_ground_truth(self, generator):
        """Ground truth stays inside the domain and stddev range"""
        box = BoundingBox((10, -5), (20, 5))
        spec = GenSpec(n=101, dims=2, n_clumps=4, stddev_range=(0.5, 1.5), domain_box=box, rng_seed=3)
        _, truth = generator.generate(spec)
        assert truth.means.shape == (4, 2)
        assert np.all(truth.means >= box.lo) and np.all(truth.means <= box.hi)
        assert np.all((truth.stddevs >= 0.5) & (truth.stddevs <= 1.5))
        assert set(truth.labels.tolist()) <= set(range(4))
        assert np.bincount(truth.labels).tolist() == spec.clump_sizes()
        assert truth.generator == Constants.GENERATOR_ID

    def test_points_are_shuffled(self, generator):
        """Points are not grouped by clump"""
        _, truth = generator.generate(GenSpec(n=400, dims=2, n_clumps=4, rng_seed=5))
        assert not np.array_equal(truth.labels, np.sort(truth.labels))

    def test_generate_to_file_writes_truth_sidecar(self, generator, tmp_path):
        """The dataset file comes with a ground-truth sidecar"""
        path = str(tmp_path / 'blobs.bin')
        points, truth = generator.generate_to_file(GenSpec(n=60, dims=2, n_clumps=3, rng_seed=9), path)
        assert os.path.exists(truth_path(path))
        with open(truth_path(path)) as handle:
            assert json.load(handle)['generator'] == Constants.GENERATOR_ID
        loaded = generator.load_truth(path)
        assert isinstance(loaded, GroundTruth)
        assert np.array_equal(loaded.labels, truth.labels)
        assert np.array_equal(generator.dataset_store.load_dataset(path), points)
