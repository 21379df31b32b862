"""
KD-Tree
Binary kd-tree whose nodes carry cell, count and weighted centroid statistics
"""

import logging
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from core.errors import ClusteringError, DimensionMismatchError, EmptyInputError
from core.geometry import BoundingBox, as_points, bbox_of, box_contains, box_union

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class KdNode:
    """
    One tree node. Leaves hold their points (and the row indices of those points in the
    tree's point array); internal nodes hold two children and the split that produced them.
    Nodes created by combine() have no split (split_dim is None).
    """
    cell: BoundingBox
    count: int
    wgt_cent: np.ndarray
    left: Optional['KdNode'] = None
    right: Optional['KdNode'] = None
    split_dim: Optional[int] = None
    split_val: Optional[float] = None
    points: Optional[np.ndarray] = None
    indices: Optional[np.ndarray] = None

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass(frozen=True, eq=False)
class KdTree:
    root: KdNode
    n_points: int
    dimensionality: int
    points: np.ndarray
    leaf_capacity: int = 1


def build(points, leaf_capacity: int = 1) -> KdTree:
    """
    Build a kd-tree over points.

    Each internal node splits its own points on the dimension of largest extent at the lower
    median: the first ceil(c/2) points in stable sorted order go left, so every point strictly
    below the median value is on the left and equal values are shared to keep both sides within
    one of each other. Cells are the bounding boxes of the node's own points. A node whose points
    are all identical becomes a leaf whatever its size.
    """
    if leaf_capacity < 1:
        raise ClusteringError(f"leaf_capacity must be >= 1, got {leaf_capacity}")
    try:
        array = as_points(points)
    except EmptyInputError:
        raise EmptyInputError("Cannot build a kd-tree from an empty point collection") from None
    except ValueError as e:
        if isinstance(e, ClusteringError):
            raise
        raise DimensionMismatchError(f"Points must share one dimensionality: {e}") from None

    root = _build_node(array, np.arange(array.shape[0]), leaf_capacity)
    tree = KdTree(root=root, n_points=array.shape[0], dimensionality=array.shape[1],
                  points=array, leaf_capacity=leaf_capacity)
    logger.debug(f"Built kd-tree: n={tree.n_points} m={tree.dimensionality} "
                 f"leaf_capacity={leaf_capacity} depth={depth(tree)}")
    return tree


def _build_node(points: np.ndarray, idx: np.ndarray, leaf_capacity: int) -> KdNode:
    own = points[idx]
    lo = own.min(axis=0)
    hi = own.max(axis=0)
    cell = BoundingBox.trusted(lo, hi)
    count = idx.shape[0]
    extent = hi - lo

    if count <= leaf_capacity or not extent.any():
        return KdNode(cell=cell, count=count, wgt_cent=own.sum(axis=0), points=own, indices=idx)

    split_dim = int(np.argmax(extent))
    order = np.argsort(own[:, split_dim], kind='stable')
    half = (count + 1) // 2
    split_val = float(own[order[half - 1], split_dim])

    left = _build_node(points, idx[order[:half]], leaf_capacity)
    right = _build_node(points, idx[order[half:]], leaf_capacity)
    return KdNode(cell=cell, count=count, wgt_cent=left.wgt_cent + right.wgt_cent,
                  left=left, right=right, split_dim=split_dim, split_val=split_val)


def iter_nodes(node: KdNode) -> Iterator[KdNode]:
    """Pre-order walk"""
    stack = [node]
    while stack:
        current = stack.pop()
        yield current
        if not current.is_leaf:
            stack.append(current.right)
            stack.append(current.left)


def iter_leaves(node: KdNode) -> Iterator[KdNode]:
    return (n for n in iter_nodes(node) if n.is_leaf)


def node_count(tree: KdTree) -> int:
    return sum(1 for _ in iter_nodes(tree.root))


def depth(tree: KdTree) -> int:
    """Longest root-to-leaf path, counted in edges"""
    deepest = 0
    stack = [(tree.root, 0)]
    while stack:
        node, level = stack.pop()
        if node.is_leaf:
            deepest = max(deepest, level)
        else:
            stack.append((node.left, level + 1))
            stack.append((node.right, level + 1))
    return deepest


def combine(trees: Sequence[KdTree]) -> KdTree:
    """
    Glue trees under synthetic internal nodes without rebuilding.
    Roots are paired level by level, each synthetic node taking the union cell and the summed
    count and weighted centroid. The result's point array is the inputs' arrays in order.
    """
    trees = list(trees)
    if len(trees) < 2:
        raise ClusteringError(f"combine() needs at least two trees, got {len(trees)}")
    dims = {t.dimensionality for t in trees}
    if len(dims) != 1:
        raise DimensionMismatchError(f"Cannot combine trees of dimensionalities {sorted(dims)}")
    for position, tree in enumerate(trees):
        if tree.n_points < 1 or tree.root.count < 1:
            raise EmptyInputError(f"Tree {position} is empty")

    level: List[KdNode] = [t.root for t in trees]
    while len(level) > 1:
        paired = []
        for i in range(0, len(level) - 1, 2):
            left, right = level[i], level[i + 1]
            paired.append(KdNode(cell=box_union(left.cell, right.cell),
                                 count=left.count + right.count,
                                 wgt_cent=left.wgt_cent + right.wgt_cent,
                                 left=left, right=right))
        if len(level) % 2:
            paired.append(level[-1])
        level = paired

    points = np.concatenate([t.points for t in trees])
    points.setflags(write=False)
    return KdTree(root=level[0], n_points=points.shape[0], dimensionality=dims.pop(),
                  points=points, leaf_capacity=max(t.leaf_capacity for t in trees))


def validate(tree: KdTree, atol: float = 1e-9) -> None:
    """Walk the whole tree and raise ClusteringError on the first broken invariant"""
    root = tree.root
    if root.count != tree.n_points:
        raise ClusteringError(f"root count {root.count} != n_points {tree.n_points}")
    if root.cell != bbox_of(tree.points):
        raise ClusteringError("root cell is not the bounding box of all points")

    for node in iter_nodes(root):
        if node.is_leaf:
            if node.points is None or node.points.shape[0] != node.count:
                raise ClusteringError("leaf count does not match its stored points")
            if not np.allclose(node.points.sum(axis=0), node.wgt_cent, rtol=0.0, atol=atol):
                raise ClusteringError("leaf wgt_cent is not the sum of its points")
            if not box_contains(node.cell, node.points):
                raise ClusteringError("leaf point lies outside its cell")
            continue
        if node.count != node.left.count + node.right.count:
            raise ClusteringError("internal count is not the sum of its children")
        if not np.allclose(node.left.wgt_cent + node.right.wgt_cent, node.wgt_cent,
                           rtol=0.0, atol=atol):
            raise ClusteringError("internal wgt_cent is not the sum of its children")
        for child in (node.left, node.right):
            if not (box_contains(node.cell, child.cell.lo) and box_contains(node.cell, child.cell.hi)):
                raise ClusteringError("child cell escapes its parent cell")


def estimate_nbytes(tree: KdTree) -> int:
    """In-memory footprint: per node a cell, a weighted centroid and a count; plus stored points"""
    m = tree.dimensionality
    per_node = (3 * m + 1) * 8
    per_point = m * 8 + 8
    return node_count(tree) * per_node + tree.n_points * per_point
