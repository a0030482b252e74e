"""Domain types, point routing and exact cost evaluation for l_p objectives."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional

import numpy as np

_CHUNK_ELEMS = 4_000_000


class InputError(ValueError):
    """Raised for malformed arguments (dimension mismatch, bad p, ...)."""


class ThresholdCut(NamedTuple):
    dim: int
    theta: float

    def goes_left(self, x) -> bool:
        return x[self.dim] <= self.theta


@dataclass(eq=False)
class Node:
    """A node of a threshold tree.

    Internal nodes carry ``dim``/``theta`` and both children; leaves carry the
    owned ``center`` index and a ``cluster`` id (equal to ``center`` unless set).
    """

    dim: int = -1
    theta: float = math.nan
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    center: int = -1
    cluster: int = -1

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    @property
    def cut(self) -> ThresholdCut:
        return ThresholdCut(self.dim, self.theta)


class ThresholdTree:
    """Binary tree of threshold cuts with one reference center per leaf."""

    def __init__(self, root: Node, d: Optional[int] = None):
        self.root = root
        self.d = d

    @classmethod
    def single_leaf(cls, d: Optional[int] = None) -> "ThresholdTree":
        return cls(Node(center=0, cluster=0), d)

    def nodes(self) -> Iterator[Node]:
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            if not node.is_leaf:
                stack.append(node.right)
                stack.append(node.left)

    def leaves(self) -> list[Node]:
        return [n for n in self.nodes() if n.is_leaf]

    def internal_nodes(self) -> list[Node]:
        return [n for n in self.nodes() if not n.is_leaf]

    @property
    def k(self) -> int:
        return len(self.leaves())

    def depth(self) -> int:
        best = 0
        stack = [(self.root, 0)]
        while stack:
            node, depth = stack.pop()
            if node.is_leaf:
                best = max(best, depth)
            else:
                stack.append((node.left, depth + 1))
                stack.append((node.right, depth + 1))
        return best

    def route(self, x) -> Node:
        x = np.asarray(x, dtype=float)
        if self.d is not None and x.shape != (self.d,):
            raise InputError(f"point has shape {x.shape}, tree expects ({self.d},)")
        node = self.root
        while not node.is_leaf:
            if node.dim >= x.shape[0]:
                raise InputError(f"tree cuts dimension {node.dim} but point has {x.shape[0]}")
            node = node.left if x[node.dim] <= node.theta else node.right
        return node

    def assign(self, points) -> np.ndarray:
        """Cluster id of every row of ``points`` (vectorised routing)."""
        X = np.asarray(points, dtype=float)
        if X.ndim != 2:
            raise InputError("points must be a 2-D array")
        if self.d is not None and X.shape[1] != self.d:
            raise InputError(f"points have {X.shape[1]} dims, tree expects {self.d}")
        out = np.full(X.shape[0], -1, dtype=np.int64)
        stack = [(self.root, np.arange(X.shape[0]))]
        while stack:
            node, idx = stack.pop()
            if node.is_leaf:
                out[idx] = node.cluster
                continue
            if idx.size == 0:
                stack.append((node.left, idx))
                stack.append((node.right, idx))
                continue
            if node.dim >= X.shape[1]:
                raise InputError(f"tree cuts dimension {node.dim} but points have {X.shape[1]}")
            mask = X[idx, node.dim] <= node.theta
            stack.append((node.left, idx[mask]))
            stack.append((node.right, idx[~mask]))
        return out

    def leaf_centers(self) -> dict[int, int]:
        """Map cluster id -> owned center index."""
        return {leaf.cluster: leaf.center for leaf in self.leaves()}

    def validate(self, centers) -> None:
        """Check the structural invariants against ``centers``; raise on violation."""
        C = np.asarray(centers, dtype=float)
        k = C.shape[0]
        leaves = self.leaves()
        if len(leaves) != k:
            raise ValueError(f"tree has {len(leaves)} leaves, expected {k}")
        if sorted(leaf.center for leaf in leaves) != list(range(k)):
            raise ValueError("leaf centers are not a permutation of range(k)")
        if len(self.internal_nodes()) != k - 1:
            raise ValueError("internal node count differs from k - 1")
        for leaf in leaves:
            if self.route(C[leaf.center]) is not leaf:
                raise ValueError(f"center {leaf.center} does not route to its own leaf")


def assign_point(tree: ThresholdTree, x) -> int:
    return tree.route(x).cluster


# -- distances and costs ------------------------------------------------------


def pow_abs(values, p: float) -> np.ndarray:
    """``|values| ** p`` with repeated multiplication for small integer ``p``."""
    a = np.abs(np.asarray(values, dtype=float))
    if float(p).is_integer() and 1 <= p <= 8:
        out = a.copy()
        for _ in range(int(p) - 1):
            out *= a
        return out
    return np.power(a, p)


def _check_p(p: float) -> float:
    p = float(p)
    if not p >= 1.0:
        raise InputError(f"p must be >= 1, got {p}")
    return p


def lp_pow_distance(x, y, p: float) -> float:
    """``||x - y||_p ** p``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    return float(np.sum(pow_abs(x - y, _check_p(p))))


def pairwise_pow_distances(points, centers, p: float) -> np.ndarray:
    """(n, k) matrix of ``||x - mu||_p ** p``, computed in memory-bounded chunks."""
    X = np.asarray(points, dtype=float)
    C = np.asarray(centers, dtype=float)
    if X.ndim != 2 or C.ndim != 2 or X.shape[1] != C.shape[1]:
        raise InputError(f"incompatible shapes {X.shape} and {C.shape}")
    p = _check_p(p)
    n, k = X.shape[0], C.shape[0]
    out = np.empty((n, k))
    step = max(1, _CHUNK_ELEMS // max(1, k * X.shape[1]))
    for start in range(0, n, step):
        block = X[start:start + step, None, :] - C[None, :, :]
        out[start:start + step] = pow_abs(block, p).sum(axis=2)
    return out


def nearest_centers(points, centers, p: float) -> np.ndarray:
    """Index of the nearest center per point; ties go to the lowest index."""
    return np.argmin(pairwise_pow_distances(points, centers, p), axis=1)


def cost_to_centers(points, centers, p: float) -> float:
    """Unconstrained cost: sum over points of the distance to the nearest center."""
    D = pairwise_pow_distances(points, centers, p)
    if D.shape[0] == 0:
        return 0.0
    return float(np.sum(D.min(axis=1)))


def optimal_center(points, p: float) -> np.ndarray:
    """Coordinate-wise minimiser of ``sum_x ||x - mu||_p ** p``.

    Median for p = 1, mean for p = 2. Otherwise each coordinate objective is
    convex with a nondecreasing derivative ``sum sign(mu - x)|mu - x|^(p-1)``;
    bisect on its sign for 200 rounds or until the bracket is below 1e-12.
    Comparing objective values instead stalls near sqrt(eps) because the
    objective is flat to float precision around its minimum.
    """
    X = np.asarray(points, dtype=float)
    p = _check_p(p)
    if X.shape[0] == 0:
        raise InputError("optimal_center needs at least one point")
    if p == 1.0:
        return np.median(X, axis=0)
    if p == 2.0:
        return X.mean(axis=0)
    lo = X.min(axis=0)
    hi = X.max(axis=0)
    for _ in range(200):
        if np.all(hi - lo < 1e-12):
            break
        mid = (lo + hi) / 2.0
        diff = mid - X
        slope = np.sum(np.sign(diff) * pow_abs(diff, p - 1.0), axis=0)
        hi = np.where(slope >= 0, mid, hi)
        lo = np.where(slope >= 0, lo, mid)
    return (lo + hi) / 2.0


@dataclass
class CostReport:
    p: float
    cost_reference_centers: float
    cost_optimal_leaf_centers: float
    cost_unconstrained: float
    leaf_center_mode: str = "reference"
    empty_leaves: list[int] = field(default_factory=list)
    seed: Optional[int] = None
    wall_time: Optional[float] = None

    @property
    def cost(self) -> float:
        if self.leaf_center_mode == "optimal":
            return self.cost_optimal_leaf_centers
        return self.cost_reference_centers

    @property
    def ratio_to_reference(self) -> float:
        """Tree cost (selected mode) over the unconstrained cost of the centers."""
        if self.cost_unconstrained == 0.0:
            return 1.0 if self.cost == 0.0 else math.inf
        return self.cost / self.cost_unconstrained


def cost_of_tree(points, tree: ThresholdTree, centers, p: float,
                 leaf_center_mode: str = "reference", seed: Optional[int] = None,
                 wall_time: Optional[float] = None) -> CostReport:
    """Cost of the explainable clustering induced by ``tree``.

    Both leaf-center modes are always evaluated; ``leaf_center_mode`` picks the
    one exposed as ``report.cost``. Leaves without points cost 0 and are listed
    in ``report.empty_leaves``.
    """
    if leaf_center_mode not in ("reference", "optimal"):
        raise InputError(f"unknown leaf_center_mode {leaf_center_mode!r}")
    X = np.asarray(points, dtype=float)
    C = np.asarray(centers, dtype=float)
    p = _check_p(p)
    if X.ndim != 2 or C.ndim != 2 or X.shape[1] != C.shape[1]:
        raise InputError(f"incompatible shapes {X.shape} and {C.shape}")
    owner = tree.leaf_centers()
    labels = tree.assign(X)
    ref_parts, opt_parts, empty = [], [], []
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], sorted(owner))
    for cluster, start, stop in zip(sorted(owner), bounds, list(bounds[1:]) + [len(order)]):
        members = X[order[start:stop]]
        if members.shape[0] == 0:
            empty.append(cluster)
            continue
        ref_leaf = np.sum(pow_abs(members - C[owner[cluster]], p))
        opt_leaf = np.sum(pow_abs(members - optimal_center(members, p), p))
        ref_parts.append(ref_leaf)
        # the reference center is itself a candidate leaf center
        opt_parts.append(min(opt_leaf, ref_leaf))
    ref = float(np.sum(ref_parts)) if ref_parts else 0.0
    opt = float(np.sum(opt_parts)) if opt_parts else 0.0
    return CostReport(p=p, cost_reference_centers=ref, cost_optimal_leaf_centers=opt,
                      cost_unconstrained=cost_to_centers(X, C, p),
                      leaf_center_mode=leaf_center_mode, empty_leaves=empty,
                      seed=seed, wall_time=wall_time)


def check_centers(centers) -> np.ndarray:
    """Validate a (k, d) center array: finite, k >= 1, pairwise distinct."""
    C = np.asarray(centers, dtype=float)
    if C.ndim != 2 or C.shape[0] < 1 or C.shape[1] < 1:
        raise InputError(f"centers must be a non-empty (k, d) array, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise InputError("centers must be finite")
    if np.unique(C, axis=0).shape[0] != C.shape[0]:
        raise InputError("centers must be pairwise distinct")
    return C
