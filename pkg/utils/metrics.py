"""
Run Metrics
Portable performance counters, per-phase wall time and Prometheus textfile export
"""

import logging
import time
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

from prometheus_client import CollectorRegistry, Gauge, write_to_textfile

from utils.logger import log_phase


@dataclass
class MetricsSink:
    """
    Counter set threaded through the clustering loops.
    distance_evaluations counts point-to-candidate distances; box_evaluations counts the
    midpoint and pruning-test distances spent at internal nodes.
    """
    distance_evaluations: int = 0
    node_visits: int = 0
    box_evaluations: int = 0
    iterations: int = 0

    def merge(self, other: 'MetricsSink') -> 'MetricsSink':
        self.distance_evaluations += other.distance_evaluations
        self.node_visits += other.node_visits
        self.box_evaluations += other.box_evaluations
        self.iterations += other.iterations
        return self


@dataclass
class RunMetrics:
    iterations: int = 0
    iterations_level1: List[int] = field(default_factory=list)
    iterations_level2: int = 0
    distance_evaluations: int = 0
    node_visits: int = 0
    box_evaluations: int = 0
    phase_times: Dict[str, float] = field(default_factory=dict)
    total_time: float = 0.0
    peak_tree_bytes_estimate: int = 0

    def absorb(self, sink: MetricsSink) -> 'RunMetrics':
        """Add a sink's counters into this run"""
        self.distance_evaluations += sink.distance_evaluations
        self.node_visits += sink.node_visits
        self.box_evaluations += sink.box_evaluations
        return self

    def absorb_run(self, other: 'RunMetrics') -> 'RunMetrics':
        """Add another run's counters (not its timings) into this run"""
        self.distance_evaluations += other.distance_evaluations
        self.node_visits += other.node_visits
        self.box_evaluations += other.box_evaluations
        return self

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'RunMetrics':
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@contextmanager
def timed_phase(metrics: Optional[RunMetrics], name: str, **details):
    """Time a block, store it under metrics.phase_times[name] and log it as a performance event"""
    start = time.perf_counter()
    try:
        yield
    finally:
        elapsed = time.perf_counter() - start
        if metrics is not None:
            metrics.phase_times[name] = metrics.phase_times.get(name, 0.0) + elapsed
        log_phase(name, elapsed, **details)


def export_prometheus(metrics: RunMetrics, path: str, labels: Optional[Dict[str, str]] = None) -> None:
    """Write the run's counters and timings as gauges to a Prometheus textfile"""
    logger = logging.getLogger(__name__)
    labels = {k: str(v) for k, v in (labels or {}).items()}
    label_names = sorted(labels)
    registry = CollectorRegistry()

    def gauge(name: str, doc: str, value: float):
        g = Gauge(name, doc, label_names, registry=registry)
        (g.labels(**labels) if label_names else g).set(value)

    gauge('kdkmeans_iterations', 'Total clustering iterations', metrics.iterations)
    gauge('kdkmeans_iterations_level2', 'Second-level refinement iterations', metrics.iterations_level2)
    gauge('kdkmeans_distance_evaluations', 'Point-to-candidate distance evaluations',
          metrics.distance_evaluations)
    gauge('kdkmeans_node_visits', 'kd-tree nodes visited', metrics.node_visits)
    gauge('kdkmeans_box_evaluations', 'Distances evaluated at internal nodes', metrics.box_evaluations)
    gauge('kdkmeans_total_seconds', 'Total wall time', metrics.total_time)
    gauge('kdkmeans_tree_bytes_estimate', 'Estimated kd-tree footprint in bytes',
          metrics.peak_tree_bytes_estimate)

    phase_gauge = Gauge('kdkmeans_phase_seconds', 'Wall time per phase', label_names + ['phase'],
                        registry=registry)
    for phase, seconds in metrics.phase_times.items():
        phase_gauge.labels(**labels, phase=phase).set(seconds)

    write_to_textfile(path, registry)
    logger.info(f"Exported metrics to {path}")
