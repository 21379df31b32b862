"""
Two-Level Clustering
Partition the data into P shards, cluster every shard with k candidates in parallel,
merge the P*k centroids down to k and refine them with the filtering algorithm on the
combined tree.
"""

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from core.baseline import lloyd_init
from core.errors import ClusteringError, DimensionMismatchError, InsufficientPointsError
from core.filtering import (
    CandidateSet, ClusteringResult, FilterConfig, check_initial, run_filtering,
)
from core.geometry import Metric, as_points, pairwise_comparison
from core.kdtree import KdTree, build, combine
from utils.logger import log_run
from utils.metrics import RunMetrics, timed_phase

logger = logging.getLogger(__name__)

__all__ = [
    'TwoLevelConfig', 'ClusteringResult', 'partition', 'cluster_level1', 'greedy_matching',
    'matching_cost', 'merge_candidates', 'refine_level2', 'run_two_level',
]


@dataclass(frozen=True)
class TwoLevelConfig:
    k: int
    partitions: int = 4
    filter_config: FilterConfig = field(default_factory=FilterConfig)
    rng_seed: int = 0
    shuffle: bool = False
    workers: int = 1
    leaf_capacity: int = 1

    def __post_init__(self):
        if self.partitions < 1:
            raise ClusteringError(f"partitions must be >= 1, got {self.partitions}")
        if self.k < 1:
            raise ClusteringError(f"k must be >= 1, got {self.k}")
        if self.workers < 1:
            raise ClusteringError(f"workers must be >= 1, got {self.workers}")

    def validate_against(self, n_points: int) -> None:
        if self.partitions * self.k > n_points:
            raise InsufficientPointsError(
                f"partitions*k = {self.partitions * self.k} exceeds n={n_points}")


def partition(points, partitions: int, shuffle: bool = False,
              rng_seed: int = 0) -> Tuple[List[np.ndarray], List[np.ndarray]]:
    """
    Split points into contiguous chunks of floor/ceil(n/P) rows (earlier chunks take the
    remainder), optionally after a seeded shuffle. Returns the shards and, for each shard,
    the original row index of every shard row.
    """
    points = as_points(points)
    n = points.shape[0]
    if partitions < 1:
        raise ClusteringError(f"partitions must be >= 1, got {partitions}")
    if n < partitions:
        raise InsufficientPointsError(f"cannot split n={n} points into {partitions} partitions")
    order = np.random.default_rng(rng_seed).permutation(n) if shuffle else np.arange(n)
    index_maps = np.array_split(order, partitions)
    return [points[idx] for idx in index_maps], index_maps


def _cluster_shard(shard_index: int, shard: np.ndarray, k: int, seed: int,
                   filter_config: FilterConfig, leaf_capacity: int) -> Tuple[ClusteringResult, KdTree]:
    try:
        initial = lloyd_init(shard, k, seed)
    except InsufficientPointsError as e:
        raise InsufficientPointsError(str(e), shard=shard_index) from None
    tree = build(shard, leaf_capacity)
    return run_filtering(tree, initial, filter_config), tree


def cluster_level1(shards: Sequence[np.ndarray],
                   config: TwoLevelConfig) -> Tuple[List[ClusteringResult], List[KdTree]]:
    """
    Cluster every shard independently with k candidates. Shard i is seeded with
    rng_seed + i. Shards run on a process pool of up to `workers` processes and results
    are gathered by shard index, never by completion order.
    """
    jobs = [(i, shard, config.k, config.rng_seed + i, config.filter_config, config.leaf_capacity)
            for i, shard in enumerate(shards)]
    pool_size = min(config.workers, len(jobs))

    if pool_size <= 1:
        outcomes = [_cluster_shard(*job) for job in jobs]
    else:
        with ProcessPoolExecutor(max_workers=pool_size) as pool:
            futures = [pool.submit(_cluster_shard, *job) for job in jobs]
            outcomes = [future.result() for future in futures]

    for i, (result, _) in enumerate(outcomes):
        logger.info(f"Level 1 shard {i}: n={shards[i].shape[0]} iterations={result.iterations}")
    return [r for r, _ in outcomes], [t for _, t in outcomes]


def greedy_matching(level1: Sequence[CandidateSet],
                    metric: Metric = Metric.EUCLIDEAN) -> List[List[int]]:
    """
    Group one centroid from every shard around each anchor of shard 0. Anchors are taken in
    index order; each picks the nearest still-unmatched centroid of every other shard
    (lowest index on ties). groups[a][s] is the index chosen in shard s for anchor a.
    """
    anchors = level1[0]
    taken = [np.zeros(z.k, dtype=bool) for z in level1]
    groups = []
    for a in range(anchors.k):
        group = [a]
        anchor = anchors.positions[a]
        for s in range(1, len(level1)):
            comparison = pairwise_comparison(anchor, level1[s].positions, metric)[0]
            comparison[taken[s]] = np.inf
            chosen = int(np.argmin(comparison))
            taken[s][chosen] = True
            group.append(chosen)
        groups.append(group)
    return groups


def matching_cost(level1: Sequence[CandidateSet], groups: Sequence[Sequence[int]],
                  metric: Metric = Metric.EUCLIDEAN) -> float:
    """Sum of anchor-to-member comparison values over all groups"""
    total = 0.0
    for group in groups:
        anchor = level1[0].positions[group[0]]
        for s, member in enumerate(group[1:], start=1):
            total += float(pairwise_comparison(anchor, level1[s].positions[member], metric)[0, 0])
    return total


def merge_candidates(level1: Sequence[CandidateSet],
                     level1_counts: Optional[Sequence[np.ndarray]] = None,
                     metric: Metric = Metric.EUCLIDEAN) -> CandidateSet:
    """
    Reduce P sets of k centroids to k. Each merged centroid is the count-weighted mean of its
    matched group (plain mean when the whole group is empty); accumulators carry the group's
    total count and weighted sum.
    """
    level1 = list(level1)
    if not level1:
        raise ClusteringError("merge_candidates() needs at least one candidate set")
    k, m = level1[0].k, level1[0].dimensionality
    for s, z in enumerate(level1):
        if z.k != k or z.dimensionality != m:
            raise DimensionMismatchError(
                f"shard {s} has {z.k} candidates of dimensionality {z.dimensionality}, "
                f"expected {k} of dimensionality {m}")
    counts = [np.asarray(c, dtype=np.int64) for c in level1_counts] if level1_counts is not None \
        else [z.acc_count for z in level1]
    if len(counts) != len(level1) or any(c.shape != (k,) for c in counts):
        raise DimensionMismatchError("level1_counts must hold one count per level-1 candidate")

    if len(level1) == 1:
        only = level1[0]
        return CandidateSet(only.positions.copy(), only.positions * counts[0][:, np.newaxis], counts[0])

    positions = np.empty((k, m))
    sums = np.empty((k, m))
    sizes = np.empty(k, dtype=np.int64)
    for a, group in enumerate(greedy_matching(level1, metric)):
        members = np.array([level1[s].positions[j] for s, j in enumerate(group)])
        weights = np.array([counts[s][j] for s, j in enumerate(group)], dtype=np.int64)
        total = int(weights.sum())
        sums[a] = (members * weights[:, np.newaxis]).sum(axis=0)
        sizes[a] = total
        positions[a] = sums[a] / total if total > 0 else members.mean(axis=0)
    return CandidateSet(positions, sums, sizes)


def refine_level2(trees: Sequence[KdTree], merged: CandidateSet, config: TwoLevelConfig,
                  index_maps: Optional[Sequence[np.ndarray]] = None) -> ClusteringResult:
    """
    Run the filtering loop from the merged centroids on the combined tree. With index_maps the
    assignments are returned in the original point order, otherwise in combined-tree order.
    """
    top = trees[0] if len(trees) == 1 else combine(trees)
    check_initial(top.n_points, top.dimensionality, merged)
    result = run_filtering(top, merged, config.filter_config)
    result.iterations_level2 = result.iterations
    if index_maps is not None:
        result.assignments = _to_original_order(result.assignments, index_maps)
    logger.info(f"Level 2 refinement: iterations={result.iterations}")
    return result


def _to_original_order(assignments: np.ndarray, index_maps: Sequence[np.ndarray]) -> np.ndarray:
    original = np.empty_like(assignments)
    original[np.concatenate(index_maps)] = assignments
    return original


def run_two_level(points, config: TwoLevelConfig) -> ClusteringResult:
    """Partition, level-1 clustering, merge and level-2 refinement, with per-phase wall time"""
    start = time.perf_counter()
    points = as_points(points)
    config.validate_against(points.shape[0])
    metrics = RunMetrics()

    try:
        with timed_phase(metrics, 'partition', partitions=config.partitions):
            shards, index_maps = partition(points, config.partitions, config.shuffle, config.rng_seed)
        with timed_phase(metrics, 'level1', workers=config.workers):
            level1, trees = cluster_level1(shards, config)
        with timed_phase(metrics, 'merge'):
            merged = merge_candidates([r.centroids for r in level1], [r.cluster_sizes for r in level1],
                                      config.filter_config.metric)

        if config.partitions == 1:
            final = level1[0]
            final.assignments = _to_original_order(final.assignments, index_maps)
            level2_iterations = 0
        else:
            with timed_phase(metrics, 'level2'):
                final = refine_level2(trees, merged, config, index_maps)
            level2_iterations = final.iterations
            metrics.absorb_run(final.metrics)
    except Exception as e:
        logger.error(f"Two-level clustering failed: {str(e)}")
        raise

    for shard_result in level1:
        metrics.absorb_run(shard_result.metrics)
    metrics.iterations_level1 = [r.iterations for r in level1]
    metrics.iterations_level2 = level2_iterations
    metrics.iterations = max(metrics.iterations_level1) + level2_iterations
    metrics.peak_tree_bytes_estimate = final.metrics.peak_tree_bytes_estimate
    metrics.total_time = time.perf_counter() - start

    log_run('two_level', points.shape[0], config.k, metrics.iterations,
            metrics.distance_evaluations, metrics.total_time)
    return ClusteringResult(centroids=final.centroids, assignments=final.assignments,
                            iterations=metrics.iterations, metrics=metrics,
                            iterations_level1=list(metrics.iterations_level1),
                            iterations_level2=level2_iterations)
