"""
Filtering Algorithm
kd-tree traversal that hands whole cells to a single candidate centroid once every
competitor has been pruned, plus the convergence loop around it
"""

import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from core.errors import ClusteringError, DimensionMismatchError, EmptyInputError, InsufficientPointsError
from core.geometry import (
    BoundingBox, Metric, Point, as_point, cluster_sums, max_distance_to_box, min_distance_to_box,
    nearest_centers, ordered_sum, pairwise_comparison, parse_metric,
)
from core.kdtree import KdNode, KdTree, estimate_nbytes
from utils.logger import log_run
from utils.metrics import MetricsSink, RunMetrics

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Candidate:
    """Read-only view of one candidate centroid and its accumulators"""
    position: Point
    acc_wgt_cent: np.ndarray
    acc_count: int
    index: int


class CandidateSet:
    """
    The k candidate centroids of one run, stored column-wise: positions (k, m),
    accumulated weighted centroids (k, m) and accumulated counts (k,).
    """

    def __init__(self, positions, acc_wgt_cent=None, acc_count=None):
        positions = np.array(positions, dtype=np.float64)
        if positions.ndim != 2:
            raise DimensionMismatchError(f"Candidate positions must be (k, m), got {positions.shape}")
        if positions.shape[0] < 1:
            raise EmptyInputError("A candidate set needs at least one candidate")
        self.positions = positions
        self.acc_wgt_cent = (np.zeros_like(positions) if acc_wgt_cent is None
                             else np.array(acc_wgt_cent, dtype=np.float64))
        self.acc_count = (np.zeros(positions.shape[0], dtype=np.int64) if acc_count is None
                          else np.array(acc_count, dtype=np.int64))
        if self.acc_wgt_cent.shape != positions.shape or self.acc_count.shape != (positions.shape[0],):
            raise DimensionMismatchError("Accumulator shapes do not match the candidate positions")

    @property
    def k(self) -> int:
        return self.positions.shape[0]

    @property
    def dimensionality(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return self.k

    def __getitem__(self, index: int) -> Candidate:
        return Candidate(position=as_point(self.positions[index]),
                         acc_wgt_cent=self.acc_wgt_cent[index].copy(),
                         acc_count=int(self.acc_count[index]),
                         index=int(index))

    @property
    def candidates(self) -> List[Candidate]:
        return [self[i] for i in range(self.k)]

    def reset_accumulators(self) -> None:
        self.acc_wgt_cent.fill(0.0)
        self.acc_count.fill(0)

    def copy(self) -> 'CandidateSet':
        return CandidateSet(self.positions.copy(), self.acc_wgt_cent.copy(), self.acc_count.copy())

    def __repr__(self) -> str:
        return f"CandidateSet(k={self.k}, m={self.dimensionality})"


@dataclass(frozen=True)
class FilterConfig:
    metric: Metric = Metric.EUCLIDEAN
    epsilon: float = 1e-9
    max_iterations: int = 1000

    def __post_init__(self):
        object.__setattr__(self, 'metric', parse_metric(self.metric))
        if self.epsilon < 0:
            raise ClusteringError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.max_iterations < 1:
            raise ClusteringError(f"max_iterations must be >= 1, got {self.max_iterations}")


@dataclass
class ClusteringResult:
    """
    Final centroids (accumulators hold the final cluster sums and sizes), one cluster index per
    input point in the caller's point order, iteration counts and counters.
    """
    centroids: CandidateSet
    assignments: np.ndarray
    iterations: int
    metrics: RunMetrics
    iterations_level1: List[int] = field(default_factory=list)
    iterations_level2: int = 0
    history: Optional[List[np.ndarray]] = None

    @property
    def k(self) -> int:
        return self.centroids.k

    @property
    def cluster_sizes(self) -> np.ndarray:
        return self.centroids.acc_count


def _as_candidate_arrays(z_set: Union[CandidateSet, Sequence[Candidate]]) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(z_set, CandidateSet):
        return z_set.positions, np.arange(z_set.k)
    z_list = list(z_set)
    if not z_list:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    return (np.array([c.position for c in z_list], dtype=np.float64),
            np.array([c.index for c in z_list], dtype=np.int64))


def closest_candidate(target, z_set: Union[CandidateSet, Sequence[Candidate]],
                      metric: Metric = Metric.EUCLIDEAN, active: Optional[np.ndarray] = None) -> int:
    """Index of the candidate closest to target; the lowest index wins ties"""
    positions, indices = _as_candidate_arrays(z_set)
    if active is not None:
        positions, indices = positions[active], indices[active]
    if indices.shape[0] == 0:
        raise EmptyInputError("closest_candidate() needs at least one candidate")
    order = np.argsort(indices, kind='stable')
    comparison = pairwise_comparison(np.asarray(target, dtype=np.float64), positions[order], metric)[0]
    return int(indices[order][np.argmin(comparison)])


def _prune_mask(positions: np.ndarray, indices: np.ndarray, star_row: int,
                cell: BoundingBox, metric: Metric) -> np.ndarray:
    """
    True for every candidate row that cannot be strictly closer than the star candidate to any
    point of the cell. A candidate with a lower index than the star also needs a strict margin,
    since it would win an exact tie.
    """
    star = positions[star_row]
    if metric is Metric.EUCLIDEAN:
        vertex = np.where(positions - star > 0, cell.hi, cell.lo)
        near = positions - vertex
        far = star - vertex
        z_value = ordered_sum(near * near)
        star_value = ordered_sum(far * far)
    else:
        z_value = min_distance_to_box(positions, cell, metric)
        star_value = max_distance_to_box(star, cell, metric)
    prune = np.where(indices < indices[star_row], z_value > star_value, z_value >= star_value)
    prune[star_row] = False
    return prune


def is_farther(z: Candidate, z_star: Candidate, cell: BoundingBox,
               metric: Metric = Metric.EUCLIDEAN) -> bool:
    """
    Sound pruning test: True only if no point of cell is strictly closer to z than to z_star.
    Euclidean uses the cell vertex extremal along z - z_star; other metrics compare the
    minimum distance from z to the cell with the maximum distance from z_star to the cell.
    """
    if z.index == z_star.index:
        raise ClusteringError("is_farther() compares two different candidates")
    positions = np.array([z.position, z_star.position], dtype=np.float64)
    indices = np.array([z.index, z_star.index], dtype=np.int64)
    return bool(_prune_mask(positions, indices, 1, cell, metric)[0])


def filter_pass(node: KdNode, z_set: CandidateSet, z_active: Optional[np.ndarray] = None,
                metric: Metric = Metric.EUCLIDEAN, metrics_sink: Optional[MetricsSink] = None) -> None:
    """
    One traversal of the tree. Each point ends up credited to the accumulators of its closest
    candidate, either one by one at a leaf or wholesale through a node's count and wgt_cent
    once a single candidate survives pruning. z_active holds candidate indices (all of them
    when omitted); accumulators are expected to be zeroed by the caller.
    """
    active = np.arange(z_set.k) if z_active is None else np.asarray(z_active, dtype=np.int64)
    if active.shape[0] == 0:
        raise EmptyInputError("filter_pass() needs at least one active candidate")
    sink = metrics_sink if metrics_sink is not None else MetricsSink()
    positions = z_set.positions
    acc_wgt_cent = z_set.acc_wgt_cent
    acc_count = z_set.acc_count

    def visit(u: KdNode, active: np.ndarray) -> None:
        sink.node_visits += 1
        if active.shape[0] == 1:
            owner = active[0]
            acc_wgt_cent[owner] += u.wgt_cent
            acc_count[owner] += u.count
            return

        if u.is_leaf:
            comparison = pairwise_comparison(u.points, positions[active], metric)
            sink.distance_evaluations += comparison.size
            owners = active[np.argmin(comparison, axis=1)]
            if u.count == 1:
                acc_wgt_cent[owners[0]] += u.points[0]
                acc_count[owners[0]] += 1
            else:
                np.add.at(acc_wgt_cent, owners, u.points)
                np.add.at(acc_count, owners, 1)
            return

        cell = u.cell
        active_positions = positions[active]
        mid = (cell.lo + cell.hi) / 2.0
        star_row = int(np.argmin(pairwise_comparison(mid, active_positions, metric)[0]))
        prune = _prune_mask(active_positions, active, star_row, cell, metric)
        sink.box_evaluations += 3 * active.shape[0] - 2
        survivors = active[~prune]

        if survivors.shape[0] == 1:
            owner = survivors[0]
            acc_wgt_cent[owner] += u.wgt_cent
            acc_count[owner] += u.count
        else:
            visit(u.left, survivors)
            visit(u.right, survivors)

    visit(node, active)


def update_step(z_set: CandidateSet, previous: Optional[CandidateSet] = None,
                metric: Metric = Metric.EUCLIDEAN) -> Tuple[CandidateSet, float]:
    """
    Move every candidate that received points to the mean of those points; empty candidates keep
    their previous position. Returns a fresh set with zeroed accumulators and the largest move.
    """
    previous = previous if previous is not None else z_set
    if previous.positions.shape != z_set.positions.shape:
        raise DimensionMismatchError("update_step() needs matching candidate sets")
    owned = z_set.acc_count > 0
    positions = previous.positions.copy()
    positions[owned] = z_set.acc_wgt_cent[owned] / z_set.acc_count[owned][:, np.newaxis]

    moves = np.zeros(z_set.k)
    if owned.any():
        delta = np.abs(positions[owned] - previous.positions[owned])
        if metric is Metric.EUCLIDEAN:
            moves[owned] = np.sqrt(ordered_sum(delta * delta))
        elif metric is Metric.MANHATTAN:
            moves[owned] = ordered_sum(delta)
        else:
            moves[owned] = delta.max(axis=1)
    return CandidateSet(positions), float(moves.max())


def wcss(points: np.ndarray, positions: np.ndarray, assignments: np.ndarray) -> float:
    """Within-cluster sum of squared Euclidean distances"""
    diff = np.asarray(points) - np.asarray(positions)[assignments]
    return float(np.sum(diff * diff))


def check_initial(n_points: int, dimensionality: int, initial: CandidateSet) -> None:
    if initial.k == 0:
        raise EmptyInputError("k must be at least 1")
    if initial.k > n_points:
        raise InsufficientPointsError(f"k={initial.k} exceeds the number of points n={n_points}")
    if initial.dimensionality != dimensionality:
        raise DimensionMismatchError(
            f"Candidates have dimensionality {initial.dimensionality}, data has {dimensionality}")


def finalize(points: np.ndarray, positions: np.ndarray, metric: Metric,
             labels: Optional[np.ndarray] = None) -> Tuple[CandidateSet, np.ndarray]:
    """Resolve per-point assignments against final positions and fill sizes and sums"""
    if labels is None:
        labels = nearest_centers(points, positions, metric)
    sums, sizes = cluster_sums(points, labels, positions.shape[0])
    return CandidateSet(positions.copy(), sums, sizes), labels


def run_filtering(tree: KdTree, initial: CandidateSet, config: Optional[FilterConfig] = None,
                  metrics_sink: Optional[MetricsSink] = None,
                  record_history: bool = False) -> ClusteringResult:
    """
    Iterate filter_pass and update_step until the largest centroid move is <= epsilon or the
    iteration cap is hit. Assignments are aligned with tree.points.
    """
    config = config or FilterConfig()
    check_initial(tree.n_points, tree.dimensionality, initial)
    start = time.perf_counter()
    sink = MetricsSink()
    current = CandidateSet(initial.positions.copy())
    history = [current.positions.copy()] if record_history else None
    movement = float('inf')

    while sink.iterations < config.max_iterations:
        current.reset_accumulators()
        filter_pass(tree.root, current, None, config.metric, sink)
        sink.iterations += 1
        current, movement = update_step(current, current, config.metric)
        if history is not None:
            history.append(current.positions.copy())
        logger.debug(f"Filtering iteration {sink.iterations}: max_movement={movement:.3e} "
                     f"distance_evaluations={sink.distance_evaluations}")
        if movement <= config.epsilon:
            break
    else:
        logger.warning(f"Filtering stopped at max_iterations={config.max_iterations} "
                       f"with max_movement={movement:.3e}")

    centroids, labels = finalize(tree.points, current.positions, config.metric)
    elapsed = time.perf_counter() - start
    metrics = RunMetrics(iterations=sink.iterations, phase_times={'filtering': elapsed},
                         total_time=elapsed, peak_tree_bytes_estimate=estimate_nbytes(tree))
    metrics.absorb(sink)
    if metrics_sink is not None:
        metrics_sink.merge(sink)
    log_run('filter', tree.n_points, initial.k, sink.iterations, sink.distance_evaluations, elapsed)
    return ClusteringResult(centroids=centroids, assignments=labels, iterations=sink.iterations,
                            metrics=metrics, history=history)
