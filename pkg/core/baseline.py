"""
Lloyd Baseline
Brute-force k-means: full n x k assignment scan followed by a mean update.
Serves as the speed baseline and as the correctness oracle for the filtering algorithm.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from core.errors import InsufficientPointsError
from core.filtering import (
    CandidateSet, ClusteringResult, FilterConfig, check_initial, finalize, update_step,
)
from core.geometry import Metric, as_points, cluster_sums, nearest_centers
from utils.logger import log_run
from utils.metrics import MetricsSink, RunMetrics

logger = logging.getLogger(__name__)


@dataclass
class LloydState:
    centroids: CandidateSet
    assignments: np.ndarray


def assign(points: np.ndarray, positions: np.ndarray, metric: Metric, workers: int = 1) -> np.ndarray:
    """
    Nearest-centroid scan. With several workers the rows are split into contiguous blocks
    evaluated on a thread pool and concatenated in block order, so the labels never depend
    on the worker count.
    """
    if workers <= 1 or points.shape[0] < 2 * workers:
        return nearest_centers(points, positions, metric)
    blocks: List[np.ndarray] = np.array_split(points, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        labels = list(pool.map(lambda block: nearest_centers(block, positions, metric), blocks))
    return np.concatenate(labels)


def lloyd_iterate(points: np.ndarray, state: LloydState, metric: Metric = Metric.EUCLIDEAN,
                  workers: int = 1, metrics_sink: Optional[MetricsSink] = None) -> Tuple[LloydState, float]:
    """One assignment step and one update step; empty clusters keep their position"""
    current = state.centroids
    labels = assign(points, current.positions, metric, workers)
    if metrics_sink is not None:
        metrics_sink.distance_evaluations += points.shape[0] * current.k
    sums, sizes = cluster_sums(points, labels, current.k)
    filled = CandidateSet(current.positions, sums, sizes)
    updated, movement = update_step(filled, current, metric)
    return LloydState(centroids=updated, assignments=labels), movement


def run_lloyd(points, initial: CandidateSet, config: Optional[FilterConfig] = None,
              metrics_sink: Optional[MetricsSink] = None, workers: int = 1,
              record_history: bool = False) -> ClusteringResult:
    """Iterate lloyd_iterate until the largest centroid move is <= epsilon or the cap is hit"""
    config = config or FilterConfig()
    points = as_points(points)
    check_initial(points.shape[0], points.shape[1], initial)
    start = time.perf_counter()
    sink = MetricsSink()
    state = LloydState(centroids=CandidateSet(initial.positions.copy()),
                       assignments=np.zeros(points.shape[0], dtype=np.int64))
    history = [state.centroids.positions.copy()] if record_history else None
    movement = float('inf')

    while sink.iterations < config.max_iterations:
        state, movement = lloyd_iterate(points, state, config.metric, workers, sink)
        sink.iterations += 1
        if history is not None:
            history.append(state.centroids.positions.copy())
        logger.debug(f"Lloyd iteration {sink.iterations}: max_movement={movement:.3e}")
        if movement <= config.epsilon:
            break
    else:
        logger.warning(f"Lloyd stopped at max_iterations={config.max_iterations} "
                       f"with max_movement={movement:.3e}")

    centroids, labels = finalize(points, state.centroids.positions, config.metric,
                                 assign(points, state.centroids.positions, config.metric, workers))
    elapsed = time.perf_counter() - start
    metrics = RunMetrics(iterations=sink.iterations, phase_times={'lloyd': elapsed}, total_time=elapsed)
    metrics.absorb(sink)
    if metrics_sink is not None:
        metrics_sink.merge(sink)
    log_run('lloyd', points.shape[0], initial.k, sink.iterations, sink.distance_evaluations, elapsed)
    return ClusteringResult(centroids=centroids, assignments=labels, iterations=sink.iterations,
                            metrics=metrics, history=history)


def lloyd_init(points, k: int, rng_seed: int = 0) -> CandidateSet:
    """
    Forgy initialization: k distinct points drawn uniformly without replacement.
    Points are visited in a seeded random order and the first k distinct ones are kept.
    """
    points = as_points(points)
    if k < 1:
        raise InsufficientPointsError(f"k must be at least 1, got {k}")
    distinct = np.unique(points, axis=0).shape[0]
    if distinct < k:
        raise InsufficientPointsError(f"only {distinct} distinct points for k={k}")

    rng = np.random.default_rng(rng_seed)
    chosen, seen = [], set()
    for row in rng.permutation(points.shape[0]):
        key = points[row].tobytes()
        if key in seen:
            continue
        seen.add(key)
        chosen.append(row)
        if len(chosen) == k:
            break
    return CandidateSet(points[chosen])
