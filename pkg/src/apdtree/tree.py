"""Balanced binary partition trees built from hyperplane and sphere splits.

Each node either splits its points at the median distance from their mean
(when the set has outliers) or at the median projection onto a direction
picked by a :class:`~apdtree.rules.SplitRule`. Node ids follow heap order:
root is 1, children of ``i`` are ``2i`` and ``2i + 1``.

Ties at the median are broken by point index, so the first ``ceil(n/2)`` points
in ``(key, index)`` order always go left and the tree stays balanced even on
duplicate-heavy data.
"""
from __future__ import annotations

import enum
import io
import os
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import (
    Dataset,
    DiameterStats,
    PointSubset,
    mean_rows,
    sq_norms,
)
from .rules import RngStream, RuleKind, SplitRule, choose_direction

__all__ = [
    "NodeKind",
    "TreeConfig",
    "TreeNode",
    "PartitionTree",
    "has_outliers",
    "median_split",
    "split_node",
    "build_tree",
    "assign_leaf",
    "tree_to_bytes",
    "tree_from_bytes",
    "save_tree",
    "load_tree",
    "default_workers",
]

THREADS_ENV = "APDTREE_THREADS"


def default_workers():
    value = os.environ.get(THREADS_ENV, "")
    try:
        return max(1, int(value))
    except ValueError:
        return 1


class NodeKind(enum.IntEnum):
    HYPERPLANE = 0
    SPHERE = 1
    LEAF = 2


@dataclass(frozen=True)
class TreeConfig:
    rule: SplitRule
    max_depth: int
    min_leaf_size: int = 1
    outlier_c: float = 10.0
    master_seed: int = 0

    def __post_init__(self):
        if self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        if self.min_leaf_size < 1:
            raise ValueError("min_leaf_size must be >= 1")
        if not self.outlier_c > 0:
            raise ValueError("outlier_c must be > 0")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in an unsigned 64-bit integer")


@dataclass(eq=False)
class TreeNode:
    node_id: int
    kind: NodeKind
    indices: np.ndarray
    normal: Optional[np.ndarray] = None
    start: Optional[np.ndarray] = None
    center: Optional[np.ndarray] = None
    threshold: float = 0.0
    radius_sq: float = 0.0
    tie_index: int = -1
    degenerate: bool = False
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None

    @property
    def depth(self):
        return self.node_id.bit_length() - 1

    @property
    def is_leaf(self):
        return self.kind is NodeKind.LEAF

    @property
    def size(self):
        return self.indices.size

    def subset(self, dataset):
        return PointSubset._trusted(dataset, self.indices)

    def goes_left(self, x, index=None):
        """Membership predicate of the left child.

        Training points pass their row ``index`` so ties at the median resolve
        exactly as they did during construction; any other point on the
        boundary goes left.
        """
        if self.kind is NodeKind.HYPERPLANE:
            key = float((x * self.normal).sum())
            bound = self.threshold
        elif self.kind is NodeKind.SPHERE:
            d = x - self.center
            key = float((d * d).sum())
            bound = self.radius_sq
        else:
            raise ValueError("leaf nodes have no split predicate")
        if key != bound:
            return key < bound
        return index is None or index <= self.tie_index


@dataclass(eq=False)
class PartitionTree:
    root: TreeNode
    config: TreeConfig
    n: int
    dim: int
    nodes: dict = field(repr=False)
    # cumulative build time (ms) once each level is finished; not serialized
    level_ms: tuple = field(default=(), repr=False)

    @property
    def depth(self):
        return max(node.depth for node in self.nodes.values())

    @property
    def node_count(self):
        return len(self.nodes)

    def leaves(self):
        return [nd for _, nd in sorted(self.nodes.items()) if nd.is_leaf]

    def internal_nodes(self):
        return [nd for _, nd in sorted(self.nodes.items()) if not nd.is_leaf]

    def truncated(self, depth):
        """Cells of the tree cut at ``depth``: nodes at that depth plus
        shallower leaves, in node-id order."""
        return [
            nd
            for _, nd in sorted(self.nodes.items())
            if nd.depth == depth or (nd.is_leaf and nd.depth < depth)
        ]

    def __eq__(self, other):
        if not isinstance(other, PartitionTree):
            return NotImplemented
        return tree_to_bytes(self) == tree_to_bytes(other)


def _outlier_condition(heuristic_sq, avg_sq, c):
    return avg_sq > 0.0 and heuristic_sq > c * avg_sq


def has_outliers(stats: DiameterStats, c: float) -> bool:
    """True when the anchor-based squared diameter exceeds ``c`` times the
    squared average diameter. A set of coincident points never qualifies."""
    return _outlier_condition(stats.heuristic_diameter_sq, stats.avg_diameter_sq, c)


def median_split(keys, indices):
    """Split ``indices`` so the first ``ceil(n/2)`` in ``(key, index)`` order go
    left. Returns ``(left, right, threshold, tie_index)``."""
    order = np.lexsort((indices, keys))
    k = (keys.size + 1) // 2
    pivot = order[k - 1]
    left = np.sort(indices[order[:k]])
    right = np.sort(indices[order[k:]])
    return left, right, float(keys[pivot]), int(indices[pivot])


def _leaf(node_id, indices, degenerate=False):
    return TreeNode(node_id, NodeKind.LEAF, np.sort(indices), degenerate=degenerate)


def split_node(s: PointSubset, cfg: TreeConfig, node_id: int):
    """Split one node's points in two.

    Returns ``(node, left_subset, right_subset)``. When every point coincides,
    or the splitting rule reports a degenerate direction, the node comes back
    as a leaf and both subsets are ``None``.
    """
    if len(s) < 2:
        raise ValueError("cannot split fewer than two points")
    idx = s.indices
    X = s.points
    n = X.shape[0]

    anchor_sq = sq_norms(X - X[int(np.argmin(idx))])
    if anchor_sq.max() == 0.0:
        return _leaf(node_id, idx, degenerate=True), None, None

    mean = mean_rows(X)
    Xc = X - mean
    dist_sq = sq_norms(Xc)
    avg_sq = 2.0 * float(dist_sq.sum()) / n

    if _outlier_condition(float(anchor_sq.max()), avg_sq, cfg.outlier_c):
        left, right, bound, tie = median_split(dist_sq, idx)
        node = TreeNode(
            node_id, NodeKind.SPHERE, np.sort(idx),
            center=mean, radius_sq=bound, tie_index=tie,
        )
    else:
        direction = choose_direction(cfg.rule, Xc, RngStream(cfg.master_seed, node_id))
        if direction.degenerate:
            return _leaf(node_id, idx, degenerate=True), None, None
        p = direction.vector
        proj = (X * p).sum(axis=1)
        left, right, bound, tie = median_split(proj, idx)
        node = TreeNode(
            node_id, NodeKind.HYPERPLANE, np.sort(idx),
            normal=p, start=direction.start, threshold=bound, tie_index=tie,
        )
    ds = s.dataset
    return node, PointSubset._trusted(ds, left), PointSubset._trusted(ds, right)


def _expand(item, cfg, level):
    node_id, s = item
    if level >= cfg.max_depth or len(s) < 2 * cfg.min_leaf_size:
        return _leaf(node_id, s.indices), None, None
    return split_node(s, cfg, node_id)


def build_tree(data: Dataset, cfg: TreeConfig, workers: Optional[int] = None) -> PartitionTree:
    """Build a partition tree level by level.

    Nodes of one level are independent and are spread over ``workers``
    threads; the result does not depend on the worker count.
    """
    workers = default_workers() if workers is None else max(1, int(workers))
    t0 = time.perf_counter()
    nodes = {}
    level_ms = []
    frontier = [(1, data.all())]
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        level = 0
        while frontier:
            if pool is not None and len(frontier) > 1:
                results = list(pool.map(lambda it: _expand(it, cfg, level), frontier))
            else:
                results = [_expand(it, cfg, level) for it in frontier]
            nxt = []
            for node, s1, s2 in results:
                nodes[node.node_id] = node
                if s1 is not None:
                    nxt.append((2 * node.node_id, s1))
                    nxt.append((2 * node.node_id + 1, s2))
            level_ms.append((time.perf_counter() - t0) * 1e3)
            frontier = nxt
            level += 1
    finally:
        if pool is not None:
            pool.shutdown()
    _link(nodes)
    return PartitionTree(nodes[1], cfg, data.n, data.dim, nodes, tuple(level_ms))


def _link(nodes):
    for node_id, node in nodes.items():
        if not node.is_leaf:
            node.left = nodes[2 * node_id]
            node.right = nodes[2 * node_id + 1]


def assign_leaf(tree: PartitionTree, x, index: Optional[int] = None) -> int:
    """Route ``x`` from the root to a leaf and return the leaf's node id."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (tree.dim,):
        raise ValueError(f"expected a vector of length {tree.dim}, got shape {x.shape}")
    node = tree.root
    while not node.is_leaf:
        node = node.left if node.goes_left(x, index) else node.right
    return node.node_id


# -- serialization ------------------------------------------------------------
#
# Layout, all integers and floats little-endian (see docs/formats.md):
#   b"APDTREE\0"  u32 version
#   config:  u8 rule kind, u32 iterations, f64 pca_tolerance, u32 max_depth,
#            u64 min_leaf_size, f64 outlier_c, u64 master_seed
#   shape:   u64 n, u64 dim, u64 node_count
#   node_count records in ascending node id:
#            u64 node_id, u8 kind, u8 degenerate, then
#            HYPERPLANE: f64 threshold, i64 tie_index, f64[dim] normal, f64[dim] start
#            SPHERE:     f64 radius_sq, i64 tie_index, f64[dim] center
#            LEAF:       u64 count, u64[count] sorted point indices

TREE_MAGIC = b"APDTREE\x00"
TREE_VERSION = 1
_RULE_CODES = {RuleKind.RP: 0, RuleKind.APD: 1, RuleKind.PCA: 2}
_CONFIG = struct.Struct("<BIdIQdQ")
_SHAPE = struct.Struct("<QQQ")
_NODE_HEAD = struct.Struct("<QBB")
_SPLIT = struct.Struct("<dq")


def _f64(a):
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def tree_to_bytes(tree: PartitionTree) -> bytes:
    cfg = tree.config
    out = io.BytesIO()
    out.write(TREE_MAGIC)
    out.write(struct.pack("<I", TREE_VERSION))
    out.write(_CONFIG.pack(
        _RULE_CODES[cfg.rule.kind], cfg.rule.iterations, cfg.rule.pca_tolerance,
        cfg.max_depth, cfg.min_leaf_size, cfg.outlier_c, cfg.master_seed,
    ))
    out.write(_SHAPE.pack(tree.n, tree.dim, len(tree.nodes)))
    for node_id in sorted(tree.nodes):
        node = tree.nodes[node_id]
        out.write(_NODE_HEAD.pack(node_id, int(node.kind), int(node.degenerate)))
        if node.kind is NodeKind.HYPERPLANE:
            out.write(_SPLIT.pack(node.threshold, node.tie_index))
            out.write(_f64(node.normal))
            out.write(_f64(node.start))
        elif node.kind is NodeKind.SPHERE:
            out.write(_SPLIT.pack(node.radius_sq, node.tie_index))
            out.write(_f64(node.center))
        else:
            out.write(struct.pack("<Q", node.indices.size))
            out.write(np.ascontiguousarray(node.indices, dtype="<u8").tobytes())
    return out.getvalue()


class _Reader:
    def __init__(self, buf):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, nbytes):
        if self.pos + nbytes > len(self.buf):
            raise ValueError("truncated tree data")
        chunk = self.buf[self.pos:self.pos + nbytes]
        self.pos += nbytes
        return chunk

    def unpack(self, st):
        return st.unpack(self.take(st.size))

    def array(self, count, dtype):
        dt = np.dtype(dtype)
        return np.frombuffer(self.take(count * dt.itemsize), dtype=dt).copy()


def tree_from_bytes(buf: bytes) -> PartitionTree:
    r = _Reader(buf)
    if bytes(r.take(len(TREE_MAGIC))) != TREE_MAGIC:
        raise ValueError("not a serialized partition tree (bad magic)")
    (version,) = r.unpack(struct.Struct("<I"))
    if version != TREE_VERSION:
        raise ValueError(f"unsupported tree format version {version}")
    code, iters, tol, max_depth, min_leaf, c, seed = r.unpack(_CONFIG)
    kinds = {v: k for k, v in _RULE_CODES.items()}
    if code not in kinds:
        raise ValueError(f"unknown rule code {code}")
    kind = kinds[code]
    cfg = TreeConfig(SplitRule(kind, iters, tol), max_depth, min_leaf, c, seed)
    n, dim, count = r.unpack(_SHAPE)

    nodes = {}
    for _ in range(count):
        node_id, kind_code, degenerate = r.unpack(_NODE_HEAD)
        if kind_code not in (0, 1, 2) or node_id < 1 or node_id in nodes:
            raise ValueError(f"corrupt node record (id {node_id}, kind {kind_code})")
        nk = NodeKind(kind_code)
        node = TreeNode(node_id, nk, np.empty(0, dtype=np.intp), degenerate=bool(degenerate))
        if nk is NodeKind.HYPERPLANE:
            node.threshold, node.tie_index = r.unpack(_SPLIT)
            node.normal = r.array(dim, "<f8").astype(np.float64)
            node.start = r.array(dim, "<f8").astype(np.float64)
        elif nk is NodeKind.SPHERE:
            node.radius_sq, node.tie_index = r.unpack(_SPLIT)
            node.center = r.array(dim, "<f8").astype(np.float64)
        else:
            (size,) = r.unpack(struct.Struct("<Q"))
            node.indices = r.array(size, "<u8").astype(np.intp)
        nodes[node_id] = node
    if r.pos != len(r.buf):
        raise ValueError("trailing bytes after tree data")

    if 1 not in nodes or any(
        not node.is_leaf and (2 * i not in nodes or 2 * i + 1 not in nodes)
        for i, node in nodes.items()
    ):
        raise ValueError("tree records do not form a complete binary tree")
    _link(nodes)
    for node_id in sorted(nodes, reverse=True):
        node = nodes[node_id]
        if not node.is_leaf:
            node.indices = np.sort(np.concatenate([node.left.indices, node.right.indices]))
    root = nodes[1]
    if not np.array_equal(root.indices, np.arange(n)):
        raise ValueError("leaf indices do not partition the dataset")
    return PartitionTree(root, cfg, n, dim, nodes)


def save_tree(tree: PartitionTree, path) -> None:
    with open(path, "wb") as fh:
        fh.write(tree_to_bytes(tree))


def load_tree(path) -> PartitionTree:
    with open(path, "rb") as fh:
        return tree_from_bytes(fh.read())
