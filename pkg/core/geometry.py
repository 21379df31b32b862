"""
Geometry
Points, axis-aligned bounding boxes and the three distance metrics shared by the engine
"""

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Union

import numpy as np

from core.errors import DimensionMismatchError, EmptyInputError, ClusteringError

# A point is a read-only 1-D float64 array; a point collection is an (n, m) float64 array.
Point = np.ndarray
ArrayLike = Union[np.ndarray, Iterable[float], Iterable[Iterable[float]]]


class Metric(Enum):
    EUCLIDEAN = "euclidean"
    MANHATTAN = "manhattan"
    CHEBYSHEV = "chebyshev"


_METRIC_ALIASES = {
    'euclidean': Metric.EUCLIDEAN,
    'l2': Metric.EUCLIDEAN,
    'manhattan': Metric.MANHATTAN,
    'l1': Metric.MANHATTAN,
    'chebyshev': Metric.CHEBYSHEV,
    'max': Metric.CHEBYSHEV,
}


def parse_metric(name: Union[str, Metric]) -> Metric:
    """Resolve a metric name (case-insensitive, "max" means Chebyshev)"""
    if isinstance(name, Metric):
        return name
    try:
        return _METRIC_ALIASES[str(name).strip().lower()]
    except KeyError:
        raise ClusteringError(f"Unknown metric: {name}") from None


def as_point(coords: ArrayLike) -> Point:
    """Copy coordinates into an immutable float64 vector"""
    point = np.array(coords, dtype=np.float64)
    if point.ndim != 1:
        raise DimensionMismatchError(f"A point must be one-dimensional, got shape {point.shape}")
    if not np.all(np.isfinite(point)):
        raise ClusteringError("Point coordinates must be finite")
    point.setflags(write=False)
    return point


def as_points(points: ArrayLike) -> np.ndarray:
    """Copy a point collection into an immutable (n, m) float64 array"""
    array = np.array(points, dtype=np.float64)
    if array.ndim == 1 and array.size == 0:
        raise EmptyInputError("Point collection is empty")
    if array.ndim != 2:
        raise DimensionMismatchError(f"Points must form an (n, m) array, got shape {array.shape}")
    if array.shape[0] == 0:
        raise EmptyInputError("Point collection is empty")
    if not np.all(np.isfinite(array)):
        raise ClusteringError("Point coordinates must be finite")
    array.setflags(write=False)
    return array


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape[-1] != b.shape[-1]:
        raise DimensionMismatchError(
            f"Dimensionality mismatch: {a.shape[-1]} vs {b.shape[-1]}"
        )


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned cell: [lo[i], hi[i]] in every dimension"""
    lo: Point
    hi: Point

    def __post_init__(self):
        lo = as_point(self.lo)
        hi = as_point(self.hi)
        _check_dims(lo, hi)
        if np.any(lo > hi):
            raise ClusteringError(f"Invalid box: lo {lo} exceeds hi {hi}")
        object.__setattr__(self, 'lo', lo)
        object.__setattr__(self, 'hi', hi)

    @classmethod
    def trusted(cls, lo: np.ndarray, hi: np.ndarray) -> 'BoundingBox':
        """Wrap arrays already known to form a valid box (tree construction hot path)"""
        box = cls.__new__(cls)
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(box, 'lo', lo)
        object.__setattr__(box, 'hi', hi)
        return box

    @property
    def dimensionality(self) -> int:
        return self.lo.shape[0]

    @property
    def extent(self) -> np.ndarray:
        return self.hi - self.lo

    def __eq__(self, other) -> bool:
        if not isinstance(other, BoundingBox):
            return NotImplemented
        return np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self) -> int:
        return hash((self.lo.tobytes(), self.hi.tobytes()))


def ordered_sum(values: np.ndarray) -> np.ndarray:
    """Sum over the last axis, strictly left to right"""
    # cumsum adds strictly left to right, so a pair's value never depends on the batch shape
    return np.cumsum(values, axis=-1)[..., -1]


def pairwise_comparison(points: np.ndarray, centers: np.ndarray, metric: Metric) -> np.ndarray:
    """
    (n, k) comparison values between points and centers.
    Squared distance for Euclidean, the distance itself otherwise; argmin is the same as for distance().
    """
    points = np.atleast_2d(points)
    centers = np.atleast_2d(centers)
    _check_dims(points, centers)
    diff = points[:, np.newaxis, :] - centers[np.newaxis, :, :]
    if metric is Metric.EUCLIDEAN:
        return ordered_sum(diff * diff)
    if metric is Metric.MANHATTAN:
        return ordered_sum(np.abs(diff))
    return np.max(np.abs(diff), axis=-1)


def nearest_centers(points: np.ndarray, centers: np.ndarray, metric: Metric,
                    block_rows: int = 4096) -> np.ndarray:
    """Index of the closest center for every point, lowest index on ties"""
    points = np.atleast_2d(points)
    labels = np.empty(points.shape[0], dtype=np.int64)
    for start in range(0, points.shape[0], block_rows):
        block = points[start:start + block_rows]
        labels[start:start + block.shape[0]] = np.argmin(
            pairwise_comparison(block, centers, metric), axis=1)
    return labels


def distance(a: ArrayLike, b: ArrayLike, metric: Metric = Metric.EUCLIDEAN) -> float:
    """Distance between two points under the given metric"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionMismatchError("distance() expects two one-dimensional points")
    _check_dims(a, b)
    value = float(pairwise_comparison(a, b, metric)[0, 0])
    if metric is Metric.EUCLIDEAN:
        return float(np.sqrt(value))
    return value


def bbox_of(points: ArrayLike) -> BoundingBox:
    """Tightest box containing every point"""
    array = np.asarray(points, dtype=np.float64)
    if array.size == 0:
        raise EmptyInputError("Cannot bound an empty point collection")
    array = np.atleast_2d(array)
    return BoundingBox(array.min(axis=0), array.max(axis=0))


def box_union(a: BoundingBox, b: BoundingBox) -> BoundingBox:
    _check_dims(a.lo, b.lo)
    return BoundingBox(np.minimum(a.lo, b.lo), np.maximum(a.hi, b.hi))


def box_contains(box: BoundingBox, points: ArrayLike) -> bool:
    array = np.atleast_2d(np.asarray(points, dtype=np.float64))
    _check_dims(array, box.lo)
    return bool(np.all(array >= box.lo) and np.all(array <= box.hi))


def midpoint(box: BoundingBox) -> Point:
    return as_point((box.lo + box.hi) / 2.0)


def extreme_vertex(box: BoundingBox, direction: ArrayLike) -> Point:
    """Vertex of the box maximizing the dot product with direction (ties pick lo)"""
    direction = np.asarray(direction, dtype=np.float64)
    _check_dims(direction, box.lo)
    return as_point(np.where(direction > 0, box.hi, box.lo))


def vertices(box: BoundingBox) -> np.ndarray:
    """All 2^m vertices of the box, one per row"""
    m = box.dimensionality
    corners = (np.arange(2 ** m)[:, np.newaxis] >> np.arange(m)) & 1
    return np.where(corners == 1, box.hi, box.lo)


def _box_gaps(p: np.ndarray, box: BoundingBox):
    near = np.maximum(np.maximum(box.lo - p, 0.0), p - box.hi)
    far = np.maximum(np.abs(p - box.lo), np.abs(p - box.hi))
    return near, far


def _reduce(gaps: np.ndarray, metric: Metric) -> np.ndarray:
    if metric is Metric.EUCLIDEAN:
        return np.sqrt(ordered_sum(gaps * gaps))
    if metric is Metric.MANHATTAN:
        return ordered_sum(gaps)
    return np.max(gaps, axis=-1)


def min_distance_to_box(p: ArrayLike, box: BoundingBox, metric: Metric = Metric.EUCLIDEAN):
    """Smallest distance from p (or each row of p) to any point of the box"""
    p = np.asarray(p, dtype=np.float64)
    _check_dims(p, box.lo)
    near, _ = _box_gaps(p, box)
    return _reduce(near, metric)


def max_distance_to_box(p: ArrayLike, box: BoundingBox, metric: Metric = Metric.EUCLIDEAN):
    """Largest distance from p (or each row of p) to any point of the box"""
    p = np.asarray(p, dtype=np.float64)
    _check_dims(p, box.lo)
    _, far = _box_gaps(p, box)
    return _reduce(far, metric)


def cluster_sums(points: np.ndarray, labels: np.ndarray, k: int):
    """Per-cluster coordinate sums (k, m) and sizes (k,), accumulated in point order"""
    points = np.atleast_2d(points)
    sums = np.empty((k, points.shape[1]), dtype=np.float64)
    for dim in range(points.shape[1]):
        sums[:, dim] = np.bincount(labels, weights=points[:, dim], minlength=k)
    return sums, np.bincount(labels, minlength=k)
