"""
Experiment Service
Runs single clustering jobs and k / dimensionality sweeps, paired with the Lloyd baseline
"""

import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from config import Config, Constants
from core.baseline import lloyd_init, run_lloyd
from core.errors import ClusteringError
from core.filtering import ClusteringResult, FilterConfig, run_filtering
from core.geometry import BoundingBox, parse_metric
from core.kdtree import build
from core.twolevel import TwoLevelConfig, run_two_level
from services.datagen_service import GenSpec
from utils.metrics import export_prometheus


def estimate_worst_case_bytes(n: int, k: int, bytes_per_entry: float = 1) -> float:
    """
    Worst-case candidate-list storage of a degenerate tree: (n-1) * k * log2(k) entries.
    With bytes_per_entry=1 the result is in entries; reading one entry as one bit
    (bytes_per_entry=1/8) gives about 122 MiB for n=10^5, k=1024.
    """
    if n < 2 or k < 2:
        raise ValueError(f"estimate needs n >= 2 and k >= 2, got n={n} k={k}")
    return (n - 1) * k * math.log2(k) * bytes_per_entry


@dataclass
class ExperimentConfig:
    algorithm: str = Config.DEFAULT_ALGORITHM
    k: int = Config.DEFAULT_K
    metric: str = Config.DEFAULT_METRIC
    partitions: int = Config.DEFAULT_PARTITIONS
    workers: int = Config.DEFAULT_WORKERS
    epsilon: float = Config.EPSILON
    max_iterations: int = Config.MAX_ITERATIONS
    seed: int = Config.RNG_SEED
    leaf_capacity: int = Config.LEAF_CAPACITY
    shuffle: bool = Config.SHUFFLE_PARTITIONS
    input_path: Optional[str] = None
    dataset_format: Optional[str] = None
    gen_spec: Optional[GenSpec] = None
    output_path: Optional[str] = None
    output_format: Optional[str] = None
    sweep: Optional[str] = None
    sweep_values: List[int] = field(default_factory=list)
    compare_baseline: bool = False
    metrics_file: Optional[str] = None

    def __post_init__(self):
        if self.algorithm not in Constants.ALGORITHMS:
            raise ClusteringError(f"unknown algorithm '{self.algorithm}', "
                                  f"expected one of {Constants.ALGORITHMS}")
        self.metric = parse_metric(self.metric).value
        if self.sweep not in (None, 'k', 'dim'):
            raise ClusteringError(f"unknown sweep '{self.sweep}', expected 'k' or 'dim'")
        if self.input_path is None and self.gen_spec is None:
            raise ClusteringError("either an input dataset or a generator spec is required")
        if self.sweep == 'dim' and self.gen_spec is None:
            raise ClusteringError("a dimensionality sweep needs a generator spec, not an input file")

    @property
    def filter_config(self) -> FilterConfig:
        return FilterConfig(metric=self.metric, epsilon=self.epsilon,
                            max_iterations=self.max_iterations)

    def echo(self) -> Dict:
        """Run configuration as written into result files"""
        return {
            'algorithm': self.algorithm,
            'k': self.k,
            'metric': self.metric,
            'partitions': self.partitions,
            'workers': self.workers,
            'epsilon': self.epsilon,
            'max_iterations': self.max_iterations,
            'seed': self.seed,
            'leaf_capacity': self.leaf_capacity,
            'shuffle': self.shuffle,
            'input': self.input_path,
            'generator': self.gen_spec.to_dict() if self.gen_spec else None,
        }


class ExperimentService:
    def __init__(self, dataset_store, generator):
        self.dataset_store = dataset_store
        self.generator = generator
        self.logger = logging.getLogger(__name__)

    def load_points(self, config: ExperimentConfig, dims: Optional[int] = None) -> np.ndarray:
        if config.input_path is not None:
            return self.dataset_store.load_dataset(config.input_path, config.dataset_format)
        spec = config.gen_spec if dims is None else self._resize_spec(config.gen_spec, dims)
        points, _ = self.generator.generate(spec)
        return points

    @staticmethod
    def _resize_spec(spec: GenSpec, dims: int) -> GenSpec:
        """Same generator settings in another dimensionality, domain stretched per coordinate"""
        box = spec.domain_box
        lo, hi = float(box.lo.min()), float(box.hi.max())
        return replace(spec, dims=dims, domain_box=BoundingBox(np.full(dims, lo), np.full(dims, hi)))

    def run_single(self, points: np.ndarray, config: ExperimentConfig,
                   algorithm: Optional[str] = None, k: Optional[int] = None) -> ClusteringResult:
        """Run one algorithm on one dataset; filter runs include tree construction in their wall time"""
        algorithm = algorithm or config.algorithm
        k = k or config.k
        filter_config = config.filter_config
        try:
            if algorithm == 'lloyd':
                initial = lloyd_init(points, k, config.seed)
                return run_lloyd(points, initial, filter_config, workers=config.workers)

            if algorithm == 'filter':
                initial = lloyd_init(points, k, config.seed)
                start = time.perf_counter()
                tree = build(points, config.leaf_capacity)
                build_time = time.perf_counter() - start
                result = run_filtering(tree, initial, filter_config)
                result.metrics.phase_times['build'] = build_time
                result.metrics.total_time += build_time
                return result

            two_level = TwoLevelConfig(k=k, partitions=config.partitions, filter_config=filter_config,
                                       rng_seed=config.seed, shuffle=config.shuffle,
                                       workers=config.workers, leaf_capacity=config.leaf_capacity)
            return run_two_level(points, two_level)
        except Exception as e:
            self.logger.error(f"{algorithm} run failed (k={k}, n={points.shape[0]}): {str(e)}")
            raise

    def run_experiment(self, config: ExperimentConfig) -> List[Dict]:
        """
        One row per run. Without a sweep the configured k is run once; a k sweep reuses one
        dataset, a dimensionality sweep regenerates it per value. With compare_baseline a Lloyd
        run on the same data and seed precedes every non-Lloyd run.
        """
        rows = []
        if config.sweep == 'dim':
            values = config.sweep_values or Constants.SWEEP_DIM_VALUES
            for dims in values:
                points = self.load_points(config, dims=dims)
                rows.append(self._run_row(points, config, config.k))
        else:
            values = (config.sweep_values or Constants.SWEEP_K_VALUES) if config.sweep == 'k' \
                else [config.k]
            points = self.load_points(config)
            for k in values:
                rows.append(self._run_row(points, config, k))
        self.logger.info(f"Experiment finished: algorithm={config.algorithm} sweep={config.sweep} "
                         f"rows={len(rows)}")
        return rows

    def _run_row(self, points: np.ndarray, config: ExperimentConfig, k: int) -> Dict:
        baseline = None
        if config.compare_baseline and config.algorithm != 'lloyd':
            baseline = self.run_single(points, config, algorithm='lloyd', k=k)
        result = self.run_single(points, config, k=k)
        return self.build_row(points, config, k, result, baseline)

    @staticmethod
    def build_row(points: np.ndarray, config: ExperimentConfig, k: int, result: ClusteringResult,
                  baseline: Optional[ClusteringResult] = None) -> Dict:
        n, dims = points.shape
        metrics = result.metrics
        per_iteration = metrics.distance_evaluations / max(metrics.iterations, 1)
        row = {
            'algorithm': config.algorithm,
            'n': n,
            'dims': dims,
            'k': k,
            'metric': config.metric,
            'partitions': config.partitions if config.algorithm == 'two_level' else None,
            'workers': config.workers,
            'seed': config.seed,
            'iterations': metrics.iterations,
            'iterations_level1': ' '.join(str(i) for i in metrics.iterations_level1) or None,
            'iterations_level2': metrics.iterations_level2 if config.algorithm == 'two_level' else None,
            'distance_evaluations': metrics.distance_evaluations,
            'node_visits': metrics.node_visits,
            'box_evaluations': metrics.box_evaluations,
            'evaluations_per_iteration': per_iteration,
            'evaluation_ratio': per_iteration / (n * k),
            'wall_time': metrics.total_time,
            'lloyd_wall_time': None,
            'lloyd_distance_evaluations': None,
            'speedup': None,
        }
        if baseline is not None:
            row['lloyd_wall_time'] = baseline.metrics.total_time
            row['lloyd_distance_evaluations'] = baseline.metrics.distance_evaluations
            if metrics.total_time > 0:
                row['speedup'] = baseline.metrics.total_time / metrics.total_time
        return row

    @staticmethod
    def report_context() -> Dict:
        """Published hardware figures, carried alongside sweep rows for reference"""
        return {'published_speedups': dict(Constants.PUBLISHED_SPEEDUPS)}

    def export_metrics(self, result: ClusteringResult, config: ExperimentConfig, path: str) -> None:
        try:
            export_prometheus(result.metrics, path, labels={'algorithm': config.algorithm,
                                                            'k': result.k})
        except OSError as e:
            self.logger.error(f"Metrics export to {path} failed: {str(e)}")
            raise
