"""
Dataset Generation Service
Synthetic Gaussian-clump datasets with ground truth for benchmarks and tests
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from sklearn.datasets import make_blobs

from config import Config, Constants
from core.errors import ClusteringError
from core.geometry import BoundingBox


@dataclass(frozen=True)
class GenSpec:
    n: int
    dims: int
    n_clumps: int
    stddev_range: Tuple[float, float] = (Config.STDDEV_LOW, Config.STDDEV_HIGH)
    domain_box: Optional[BoundingBox] = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.dims < 1:
            raise ClusteringError(f"dims must be >= 1, got {self.dims}")
        if not self.n >= self.n_clumps >= 1:
            raise ClusteringError(f"need n >= n_clumps >= 1, got n={self.n} n_clumps={self.n_clumps}")
        low, high = self.stddev_range
        if not 0 < low <= high:
            raise ClusteringError(f"need 0 < low <= high for stddev_range, got {self.stddev_range}")
        if self.domain_box is None:
            object.__setattr__(self, 'domain_box', BoundingBox(
                np.full(self.dims, Config.DOMAIN_LOW), np.full(self.dims, Config.DOMAIN_HIGH)))
        elif self.domain_box.dimensionality != self.dims:
            raise ClusteringError(
                f"domain box has {self.domain_box.dimensionality} dims, expected {self.dims}")

    def clump_sizes(self) -> List[int]:
        """Even split, the remainder going one point each to the earlier clumps"""
        base, extra = divmod(self.n, self.n_clumps)
        return [base + (1 if i < extra else 0) for i in range(self.n_clumps)]

    def to_dict(self) -> Dict:
        return {
            'n': self.n,
            'dims': self.dims,
            'n_clumps': self.n_clumps,
            'stddev_range': list(self.stddev_range),
            'domain_box': {'lo': self.domain_box.lo.tolist(), 'hi': self.domain_box.hi.tolist()},
            'rng_seed': self.rng_seed,
        }


@dataclass
class GroundTruth:
    means: np.ndarray
    stddevs: np.ndarray
    labels: np.ndarray
    generator: str = Constants.GENERATOR_ID
    spec: Dict = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return {
            'generator': self.generator,
            'spec': self.spec,
            'means': self.means.tolist(),
            'stddevs': self.stddevs.tolist(),
            'labels': self.labels.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'GroundTruth':
        return cls(means=np.array(data['means'], dtype=np.float64),
                   stddevs=np.array(data['stddevs'], dtype=np.float64),
                   labels=np.array(data['labels'], dtype=np.int64),
                   generator=data.get('generator', Constants.GENERATOR_ID),
                   spec=data.get('spec', {}))


def truth_path(dataset_path: str) -> str:
    return f"{dataset_path}.truth.json"


class DatasetGenerator:
    def __init__(self, dataset_store=None):
        self.dataset_store = dataset_store
        self.logger = logging.getLogger(__name__)

    def generate(self, spec: GenSpec) -> Tuple[np.ndarray, GroundTruth]:
        """
        Clump means are uniform in the domain box, per-clump stddevs uniform in the stddev
        range, and every point is its clump mean plus isotropic normal noise. One seeded
        stream drives means, stddevs, noise and the final shuffle.
        """
        rs = np.random.RandomState(spec.rng_seed)
        box = spec.domain_box
        means = rs.uniform(box.lo, box.hi, size=(spec.n_clumps, spec.dims))
        low, high = spec.stddev_range
        stddevs = rs.uniform(low, high, size=spec.n_clumps)

        points, labels = make_blobs(n_samples=spec.clump_sizes(), n_features=spec.dims,
                                    centers=means, cluster_std=stddevs, shuffle=True,
                                    random_state=rs)

        self.logger.info(f"Generated dataset: n={spec.n} dims={spec.dims} clumps={spec.n_clumps} "
                         f"seed={spec.rng_seed}")
        truth = GroundTruth(means=means, stddevs=stddevs, labels=labels.astype(np.int64),
                            spec=spec.to_dict())
        return np.ascontiguousarray(points, dtype=np.float64), truth

    def generate_to_file(self, spec: GenSpec, path: str,
                         fmt: Optional[str] = None) -> Tuple[np.ndarray, GroundTruth]:
        """Generate, write the dataset and its ground-truth sidecar"""
        if self.dataset_store is None:
            raise RuntimeError("DatasetGenerator needs a dataset store to write files")
        points, truth = self.generate(spec)
        self.dataset_store.save_dataset(points, path, fmt)
        self.dataset_store.save_json(truth.to_dict(), truth_path(path))
        return points, truth

    def load_truth(self, dataset_path: str) -> GroundTruth:
        return GroundTruth.from_dict(self.dataset_store.load_json(truth_path(dataset_path)))
