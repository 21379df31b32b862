"""
Tests for the filtering algorithm: candidate selection, pruning, traversal and convergence
"""

import numpy as np
import pytest

from core.baseline import lloyd_init, run_lloyd
from core.errors import ClusteringError, DimensionMismatchError, EmptyInputError, InsufficientPointsError
from core.filtering import (
    CandidateSet, FilterConfig, closest_candidate, filter_pass, is_farther, run_filtering,
    update_step, wcss,
)
from core.geometry import BoundingBox, Metric, distance, nearest_centers, pairwise_comparison
from core.kdtree import build
from utils.metrics import MetricsSink

ALL_METRICS = [Metric.EUCLIDEAN, Metric.MANHATTAN, Metric.CHEBYSHEV]


def cell_grid(cell, steps=11):
    """Every point of a steps^m lattice spanning the cell, vertices included"""
    axes = [np.linspace(lo, hi, steps) for lo, hi in zip(cell.lo, cell.hi)]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, cell.lo.shape[0])


def grid_distances(grid, z, metric):
    return pairwise_comparison(grid, z[np.newaxis, :], metric)[:, 0]


class TestClosestCandidate:

    def test_nearest(self):
        """The nearest candidate wins"""
        z_set = CandidateSet([(1, 0), (5, 0)])
        assert closest_candidate((0, 0), z_set) == 0

    def test_tie_goes_to_lowest_index(self):
        """Ties go to the lowest index in any order"""
        z_set = CandidateSet([(1, 0), (-1, 0)])
        assert closest_candidate((0, 0), z_set) == 0
        assert closest_candidate((0, 0), list(reversed(z_set.candidates))) == 0

    def test_active_subset(self):
        """Only active candidates are considered"""
        z_set = CandidateSet([(0, 0), (1, 0), (5, 0)])
        assert closest_candidate((0, 0), z_set, active=np.array([1, 2])) == 1

    @pytest.mark.parametrize('metric', ALL_METRICS)
    def test_matches_linear_scan(self, rng, metric):
        """Agrees with a linear scan for every metric"""
        for _ in range(50):
            z_set = CandidateSet(rng.normal(size=(8, 3)))
            target = rng.normal(size=3)
            scan = min(range(8), key=lambda i: (distance(target, z_set.positions[i], metric), i))
            assert closest_candidate(target, z_set, metric) == scan

    def test_empty(self):
        """An empty candidate list is rejected"""
        with pytest.raises(EmptyInputError):
            closest_candidate((0, 0), [])


class TestIsFarther:

    @pytest.mark.parametrize('metric', ALL_METRICS)
    def test_far_candidate_is_pruned(self, metric):
        """A distant candidate is pruned"""
        z_set = CandidateSet([(10, 10), (0.5, 0.5)])
        cell = BoundingBox((0, 0), (1, 1))
        assert is_farther(z_set[0], z_set[1], cell, metric)

    @pytest.mark.parametrize('metric', ALL_METRICS)
    def test_candidate_inside_cell_is_kept(self, metric):
        """A candidate inside the cell is kept"""
        z_set = CandidateSet([(0.2, 0.2), (0.5, 0.5)])
        cell = BoundingBox((0, 0), (1, 1))
        assert not is_farther(z_set[0], z_set[1], cell, metric)

    def test_same_candidate_rejected(self):
        """A candidate cannot be compared with itself"""
        z_set = CandidateSet([(0, 0), (1, 1)])
        with pytest.raises(ClusteringError):
            is_farther(z_set[0], z_set[0], BoundingBox((0, 0), (1, 1)))

    @pytest.mark.parametrize('metric', ALL_METRICS)
    def test_sound_against_cell_grid(self, rng, metric):
        """A pruned candidate is never strictly closer than z_star to any point of the 11^m cell grid"""
        pruned = 0
        for trial in range(500):
            m = 1 + trial % 4
            lo = rng.uniform(-2, 2, size=m)
            cell = BoundingBox(lo, lo + rng.uniform(0.01, 2, size=m))
            z_set = CandidateSet(rng.uniform(-6, 6, size=(2, m)))
            grid = cell_grid(cell)
            for z, z_star in ((0, 1), (1, 0)):
                if not is_farther(z_set[z], z_set[z_star], cell, metric):
                    continue
                pruned += 1
                to_z = grid_distances(grid, z_set.positions[z], metric)
                to_star = grid_distances(grid, z_set.positions[z_star], metric)
                assert np.all(to_z >= to_star)
        assert pruned > 0


class TestFilterPass:

    def test_single_active_candidate_short_circuits(self, rng):
        """One active candidate takes the whole tree at the root"""
        points = rng.normal(size=(50, 2))
        tree = build(points)
        z_set = CandidateSet([(0, 0), (100, 100)])
        sink = MetricsSink()
        filter_pass(tree.root, z_set, np.array([1]), Metric.EUCLIDEAN, sink)
        assert sink.node_visits == 1
        assert sink.distance_evaluations == 0
        assert z_set.acc_count.tolist() == [0, 50]
        assert np.array_equal(z_set.acc_wgt_cent[1], tree.root.wgt_cent)

    def test_two_clumps(self, rng):
        """Two clumps are credited to their own candidates"""
        left = rng.normal(loc=(-20, 0), scale=0.5, size=(40, 2))
        right = rng.normal(loc=(20, 0), scale=0.5, size=(60, 2))
        tree = build(np.vstack([left, right]))
        z_set = CandidateSet([left.mean(axis=0), right.mean(axis=0)])
        filter_pass(tree.root, z_set)
        assert z_set.acc_count.tolist() == [40, 60]
        assert np.allclose(z_set.acc_wgt_cent[0], left.sum(axis=0), atol=1e-9)
        assert np.allclose(z_set.acc_wgt_cent[1], right.sum(axis=0), atol=1e-9)

    @pytest.mark.parametrize('metric', ALL_METRICS)
    def test_conservation(self, make_instance, metric):
        """Accumulators conserve points and sums"""
        for seed in range(40):
            points, k = make_instance(seed)
            tree = build(points)
            z_set = lloyd_init(points, k, seed)
            sink = MetricsSink()
            filter_pass(tree.root, z_set, None, metric, sink)
            assert int(z_set.acc_count.sum()) == points.shape[0]
            assert np.allclose(z_set.acc_wgt_cent.sum(axis=0), points.sum(axis=0), atol=1e-6)
            assert sink.distance_evaluations <= points.shape[0] * k

    @pytest.mark.parametrize('metric', ALL_METRICS)
    def test_matches_brute_force_assignment(self, make_instance, metric):
        """Per-candidate counts equal brute-force assignment"""
        for seed in range(40):
            points, k = make_instance(seed)
            z_set = lloyd_init(points, k, seed)
            filter_pass(build(points, leaf_capacity=4).root, z_set, None, metric)
            labels = nearest_centers(points, z_set.positions, metric)
            assert z_set.acc_count.tolist() == np.bincount(labels, minlength=k).tolist()

    def test_no_active_candidates(self):
        """An empty active set is rejected"""
        with pytest.raises(EmptyInputError):
            filter_pass(build([(0, 0)]).root, CandidateSet([(0, 0)]), np.array([], dtype=np.int64))


class TestUpdateStep:

    def test_mean_of_accumulated_points(self):
        """Candidates move to the mean of their points"""
        z_set = CandidateSet([(0, 0)], acc_wgt_cent=[(10, 20)], acc_count=[4])
        updated, movement = update_step(z_set)
        assert updated.positions.tolist() == [[2.5, 5.0]]
        assert movement == pytest.approx(np.hypot(2.5, 5.0))

    def test_empty_candidate_keeps_position(self):
        """An empty candidate stays where it was"""
        z_set = CandidateSet([(1, 1), (0, 0)], acc_wgt_cent=[(0, 0), (2, 2)], acc_count=[0, 2])
        updated, movement = update_step(z_set)
        assert updated.positions.tolist() == [[1, 1], [1, 1]]
        assert movement == pytest.approx(np.sqrt(2))

    def test_accumulators_reset(self):
        """Updated candidates start with empty accumulators"""
        z_set = CandidateSet([(0, 0)], acc_wgt_cent=[(3, 3)], acc_count=[3])
        updated, _ = update_step(z_set)
        assert updated.acc_count.tolist() == [0]
        assert updated.acc_wgt_cent.tolist() == [[0, 0]]

    def test_matches_lloyd_step(self, rng):
        """One pass and update equal one Lloyd step"""
        points = rng.normal(size=(80, 3))
        z_set = lloyd_init(points, 5, 1)
        labels = nearest_centers(points, z_set.positions, Metric.EUCLIDEAN)
        filter_pass(build(points).root, z_set)
        updated, _ = update_step(z_set)
        for c in range(5):
            assert np.allclose(updated.positions[c], points[labels == c].mean(axis=0), atol=1e-12)

    def test_shape_mismatch(self):
        """Candidate sets of different size are rejected"""
        with pytest.raises(DimensionMismatchError):
            update_step(CandidateSet([(0, 0)]), CandidateSet([(0, 0), (1, 1)]))


class TestRunFiltering:

    def test_single_centroid_converges_to_mean(self, rng):
        """A single centroid converges to the mean"""
        points = rng.normal(size=(100, 2))
        result = run_filtering(build(points), CandidateSet([points[0]]))
        assert result.iterations <= 2
        assert np.allclose(result.centroids.positions[0], points.mean(axis=0), atol=1e-12)
        assert result.assignments.tolist() == [0] * 100

    def test_points_as_initial_centroids_are_a_fixed_point(self, rng):
        """Centroids on every point stop after one iteration"""
        points = rng.normal(size=(12, 2))
        result = run_filtering(build(points), CandidateSet(points))
        assert result.iterations == 1
        assert np.array_equal(result.centroids.positions, points)
        assert result.assignments.tolist() == list(range(12))
        assert result.cluster_sizes.tolist() == [1] * 12

    def test_matches_lloyd_iteration_by_iteration(self, make_instance):
        """Filtering reproduces Lloyd's centroid sequence on 200 instances"""
        config = FilterConfig(epsilon=0.0, max_iterations=200)
        for seed in range(200):
            points, k = make_instance(seed)
            initial = lloyd_init(points, k, seed)
            filtered = run_filtering(build(points), initial, config, record_history=True)
            brute = run_lloyd(points, initial, config, record_history=True)
            assert filtered.iterations == brute.iterations
            for ours, theirs in zip(filtered.history, brute.history):
                assert np.allclose(ours, theirs, rtol=0.0, atol=1e-9)
            assert np.array_equal(filtered.assignments, brute.assignments)

    @pytest.mark.parametrize('metric', [Metric.MANHATTAN, Metric.CHEBYSHEV])
    def test_matches_lloyd_other_metrics(self, make_instance, metric):
        """Filtering matches Lloyd under L1 and L-inf"""
        config = FilterConfig(metric=metric, epsilon=0.0, max_iterations=200)
        for seed in range(30):
            points, k = make_instance(seed)
            initial = lloyd_init(points, k, seed)
            filtered = run_filtering(build(points), initial, config)
            brute = run_lloyd(points, initial, config)
            assert np.allclose(filtered.centroids.positions, brute.centroids.positions, atol=1e-9)
            assert np.array_equal(filtered.assignments, brute.assignments)

    def test_wcss_non_increasing(self, make_instance):
        """The objective never increases between iterations"""
        for seed in range(30):
            points, k = make_instance(seed)
            result = run_filtering(build(points), lloyd_init(points, k, seed), record_history=True)
            scores = [wcss(points, positions, nearest_centers(points, positions, Metric.EUCLIDEAN))
                      for positions in result.history]
            for before, after in zip(scores, scores[1:]):
                assert after <= before * (1 + 1e-6) + 1e-12

    def test_counters(self, clumped):
        """Pruning keeps evaluations under half of Lloyd's on clumped data"""
        points, _ = clumped
        n, k = points.shape[0], 4
        sink = MetricsSink()
        result = run_filtering(build(points), lloyd_init(points, k, 0), metrics_sink=sink)
        metrics = result.metrics
        assert metrics.distance_evaluations == sink.distance_evaluations
        assert metrics.iterations == result.iterations
        assert metrics.node_visits > 0 and metrics.box_evaluations > 0
        assert metrics.distance_evaluations < 0.5 * result.iterations * n * k
        assert metrics.peak_tree_bytes_estimate > 0
        assert 'filtering' in metrics.phase_times

    def test_max_iterations_cap(self, rng):
        """The loop stops at max_iterations"""
        points = rng.normal(size=(60, 2))
        result = run_filtering(build(points), lloyd_init(points, 3, 0),
                               FilterConfig(epsilon=0.0, max_iterations=1))
        assert result.iterations == 1

    def test_k_larger_than_n(self):
        """More centroids than points is rejected"""
        with pytest.raises(InsufficientPointsError):
            run_filtering(build([(0, 0), (1, 1)]), CandidateSet([(0, 0), (1, 1), (2, 2)]))

    def test_dimension_mismatch(self):
        """Centroids of another dimensionality are rejected"""
        with pytest.raises(DimensionMismatchError):
            run_filtering(build([(0, 0), (1, 1)]), CandidateSet([(0, 0, 0)]))

    def test_zero_candidates(self):
        """A candidate set needs at least one candidate"""
        with pytest.raises(EmptyInputError):
            CandidateSet(np.empty((0, 2)))


class TestFilterConfig:

    def test_metric_names(self):
        """Metric names are parsed"""
        assert FilterConfig(metric='max').metric is Metric.CHEBYSHEV

    @pytest.mark.parametrize('kwargs', [{'epsilon': -1.0}, {'max_iterations': 0}])
    def test_invalid(self, kwargs):
        """Negative epsilon and zero iterations are rejected"""
        with pytest.raises(ClusteringError):
            FilterConfig(**kwargs)
