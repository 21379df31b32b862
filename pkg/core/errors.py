"""
Clustering Errors
Exception types raised by the clustering library and its I/O layer
"""

from typing import Optional


class ClusteringError(ValueError):
    """Base class for every hard error raised by the engine"""


class DimensionMismatchError(ClusteringError):
    """Points, boxes or candidates disagree on dimensionality"""


class EmptyInputError(ClusteringError):
    """An operation that needs at least one element received none"""


class InsufficientPointsError(ClusteringError):
    """Fewer (distinct) points than required by k or the partition count"""

    def __init__(self, message: str, shard: Optional[int] = None):
        if shard is not None:
            message = f"shard {shard}: {message}"
        super().__init__(message)
        self.shard = shard


class DatasetFormatError(ClusteringError):
    """A dataset or result file could not be parsed"""

    def __init__(self, path: str, message: str, line: Optional[int] = None):
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")
        self.path = str(path)
        self.line = line
