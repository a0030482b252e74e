"""Reference tree builders: uniform random cuts, the sample-discard variant,
the general-p interval-law builder and the greedy min-mistake baseline.

The randomized builders take only the centers; they never see data points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import InputError, Node, ThresholdCut, ThresholdTree, _check_p, check_centers, nearest_centers
from .geometry import all_intervals, bounding_box, warped_coordinates
from .samplers import theta_inverse_cdf

MAX_CONSECUTIVE_DISCARDS = 10_000_000


class DiscardLoopError(RuntimeError):
    """The rejection loop hit its safeguard; indicates a float pathology."""


@dataclass
class TraceEntry:
    iteration: int
    cut: ThresholdCut
    accepted: bool
    leaves_split: int
    cmax: Optional[float]
    draws: int = 1
    """Unconditioned draws this conditioned draw stands for (geometric count)."""


@dataclass
class BuildTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    resampled: int = 0
    """Conditioned-away draws (cuts that would split no leaf)."""
    total_mass: float = 0.0
    """L for the uniform law, L_p for D_p."""
    metric: str = "l1"

    @property
    def accepted(self) -> list[TraceEntry]:
        return [e for e in self.entries if e.accepted]

    @property
    def n_accepted(self) -> int:
        return sum(1 for e in self.entries if e.accepted)

    @property
    def n_discarded(self) -> int:
        return sum(1 for e in self.entries if not e.accepted)

    def cmax_sequence(self) -> list[float]:
        return [e.cmax for e in self.accepted if e.cmax is not None]


@dataclass(eq=False)
class LeafState:
    members: np.ndarray
    node: Node
    created: int
    diameter: float = 0.0
    lo: Optional[np.ndarray] = None
    hi: Optional[np.ndarray] = None


def _diameter(Z: np.ndarray) -> float:
    """Largest l1 distance among rows of ``Z`` (pair scan)."""
    if Z.shape[0] < 2:
        return 0.0
    if Z.shape[0] <= 256:
        return float(np.abs(Z[:, None, :] - Z[None, :, :]).sum(axis=2).max())
    best = 0.0
    for r in range(Z.shape[0] - 1):
        best = max(best, float(np.abs(Z[r + 1:] - Z[r]).sum(axis=1).max()))
    return best


def _union_segments(lo: np.ndarray, hi: np.ndarray):
    """Merge half-open [lo, hi) intervals; returns sorted disjoint (starts, ends)."""
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    if lo.size == 0:
        return lo, hi
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    run_end = np.maximum.accumulate(hi)
    new = np.ones(lo.size, dtype=bool)
    new[1:] = lo[1:] > run_end[:-1]
    starts = lo[new]
    group = np.cumsum(new) - 1
    ends = np.zeros(starts.size)
    np.maximum.at(ends, group, hi)
    return starts, ends


class _Partition:
    """Current leaves of a build, with the tree being grown underneath them."""

    def __init__(self, C: np.ndarray, Z: np.ndarray):
        self.C = C
        self.Z = Z
        self.root = Node()
        root_leaf = self._leaf(np.arange(C.shape[0]), self.root, 0)
        self.open: list[LeafState] = [root_leaf] if C.shape[0] > 1 else []
        if C.shape[0] == 1:
            self.root.center = self.root.cluster = 0

    def _leaf(self, members: np.ndarray, node: Node, t: int) -> LeafState:
        P = self.C[members]
        return LeafState(members, node, t, _diameter(self.Z[members]), P.min(axis=0), P.max(axis=0))

    def cmax(self) -> float:
        return max((leaf.diameter for leaf in self.open), default=0.0)

    def extents(self):
        """(n_open, d) arrays of per-leaf coordinate minima and maxima."""
        return (np.array([leaf.lo for leaf in self.open]),
                np.array([leaf.hi for leaf in self.open]))

    def split_by(self, cut: ThresholdCut) -> list[LeafState]:
        """Leaves with members on both sides: min <= theta < max in the cut dimension."""
        return [leaf for leaf in self.open
                if leaf.lo[cut.dim] <= cut.theta < leaf.hi[cut.dim]]

    def _sides(self, leaf: LeafState, cut: ThresholdCut):
        left = self.C[leaf.members, cut.dim] <= cut.theta
        return left, leaf.members

    def separated_min(self, cut: ThresholdCut, leaves: list[LeafState]) -> float:
        best = math.inf
        for leaf in leaves:
            left, idx = self._sides(leaf, cut)
            A, B = self.Z[idx[left]], self.Z[idx[~left]]
            best = min(best, float(np.abs(A[:, None, :] - B[None, :, :]).sum(axis=2).min()))
        return best

    def apply(self, cut: ThresholdCut, leaves: list[LeafState], t: int) -> None:
        for leaf in leaves:
            self.open.remove(leaf)
            left, idx = self._sides(leaf, cut)
            node = leaf.node
            node.dim, node.theta = int(cut.dim), float(cut.theta)
            node.left, node.right = Node(), Node()
            for child, members in ((node.left, idx[left]), (node.right, idx[~left])):
                if members.size == 1:
                    child.center = child.cluster = int(members[0])
                else:
                    self.open.append(self._leaf(members, child, t))


def _trivial(C: np.ndarray, metric: str):
    return ThresholdTree(Node(center=0, cluster=0), C.shape[1]), BuildTrace(metric=metric)


def _sample_conditioned_uniform(part: _Partition, L: float, rng: np.random.Generator):
    """Uniform cut conditioned on splitting some open leaf.

    A cut (i, theta) splits B iff min_B,i <= theta < max_B,i, so the splitting
    set per dimension is a union of half-open extents. Also returns how many
    unconditioned box draws this stands for (geometric in union / L).
    """
    lo, hi = part.extents()
    d = part.C.shape[1]
    segs = [_union_segments(lo[:, i], hi[:, i]) for i in range(d)]
    lengths = np.array([float(np.sum(e - s)) for s, e in segs])
    U = float(np.sum(lengths))
    i = int(rng.choice(d, p=lengths / U))
    starts, ends = segs[i]
    cum = np.cumsum(ends - starts)
    s = rng.random() * cum[-1]
    j = min(int(np.searchsorted(cum, s, side="right")), len(cum) - 1)
    theta = starts[j] + (s - (cum[j] - (ends[j] - starts[j])))
    theta = min(max(theta, starts[j]), np.nextafter(ends[j], -np.inf))
    draws = int(rng.geometric(min(1.0, U / L)))
    return ThresholdCut(i, float(theta)), draws


def _grow_uniform(C: np.ndarray, rng, ell: Optional[int]) -> tuple[ThresholdTree, BuildTrace]:
    k = C.shape[0]
    if k == 1:
        return _trivial(C, "l1")
    L = bounding_box(C).total_length
    part = _Partition(C, C)
    trace = BuildTrace(total_mass=L, metric="l1")
    limit = 0.0 if ell is None else part.cmax() / float(k) ** ell
    t = consecutive = 0
    while part.open:
        cmax = part.cmax()
        if ell is not None:
            limit = cmax / float(k) ** ell
        cut, draws = _sample_conditioned_uniform(part, L, rng)
        split = part.split_by(cut)
        if not split:
            trace.resampled += 1
            continue
        if ell is not None and part.separated_min(cut, split) <= limit:
            consecutive += 1
            if consecutive >= MAX_CONSECUTIVE_DISCARDS:
                raise DiscardLoopError(f"{consecutive} consecutive discards at c_max={cmax}")
            trace.entries.append(TraceEntry(t, cut, False, 0, cmax, draws))
            t += 1
            continue
        consecutive = 0
        trace.entries.append(TraceEntry(t, cut, True, len(split), cmax, draws))
        part.apply(cut, split, t)
        t += 1
    return ThresholdTree(part.root, C.shape[1]), trace


def build_uniform(centers, rng: np.random.Generator) -> tuple[ThresholdTree, BuildTrace]:
    """Uniform cuts over the bounding box, each splitting every leaf it crosses.

    Cuts that would split nothing are resampled away (conditioned sampling);
    ``TraceEntry.draws`` keeps the equivalent unconditioned draw count.
    """
    return _grow_uniform(check_centers(centers), rng, None)


def build_modified(centers, rng: np.random.Generator, ell: int = 4) -> tuple[ThresholdTree, BuildTrace]:
    """Sample-discard variant: a uniform cut is discarded when it separates two
    co-leaf centers at l1 distance <= c_max(t) / k**ell."""
    if int(ell) != ell or ell < 4:
        raise InputError(f"ell must be an integer >= 4, got {ell}")
    return _grow_uniform(check_centers(centers), rng, int(ell))


def build_lp(centers, p: float, rng: np.random.Generator, ell: int = 4) -> tuple[ThresholdTree, BuildTrace]:
    """Cuts drawn from D_p; discard when the cut separates two co-leaf centers
    whose pseudo-distance is <= c'_p,max(t) / k**ell.

    Sampling is conditioned on intervals still spanned by some open leaf, which
    are exactly the intervals whose cuts split something.
    """
    C = check_centers(centers)
    p = _check_p(p)
    if int(ell) != ell or ell < 4:
        raise InputError(f"ell must be an integer >= 4, got {ell}")
    k = C.shape[0]
    if k == 1:
        return _trivial(C, "pseudo_p")
    I = all_intervals(C, p)
    Z = warped_coordinates(C, p)
    part = _Partition(C, Z)
    trace = BuildTrace(total_mass=I.total_weight, metric="pseudo_p")
    kl = float(k) ** int(ell)
    t = consecutive = 0
    while part.open:
        cmax = part.cmax()
        limit = cmax / kl
        lo, hi = part.extents()
        live = np.zeros(len(I), dtype=bool)
        for i in range(C.shape[1]):
            sl = slice(I.offsets[i], I.offsets[i + 1])
            a, b = I.a[sl], I.b[sl]
            live[sl] = ((lo[:, i][:, None] <= a[None, :]) & (hi[:, i][:, None] >= b[None, :])).any(axis=0)
        w = np.where(live, I.weights, 0.0)
        cum = np.cumsum(w)
        e = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(w) - 1)
        while w[e] == 0:
            e = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), len(w) - 1)
        theta = theta_inverse_cdf(I.a[e], I.b[e], p, rng.random())
        cut = ThresholdCut(int(I.dims[e]), float(theta))
        draws = int(rng.geometric(min(1.0, cum[-1] / I.total_weight)))
        split = part.split_by(cut)
        if not split:
            trace.resampled += 1
            continue
        if part.separated_min(cut, split) <= limit:
            consecutive += 1
            if consecutive >= MAX_CONSECUTIVE_DISCARDS:
                raise DiscardLoopError(f"{consecutive} consecutive discards at c'_max={cmax}")
            trace.entries.append(TraceEntry(t, cut, False, 0, cmax, draws))
            t += 1
            continue
        consecutive = 0
        trace.entries.append(TraceEntry(t, cut, True, len(split), cmax, draws))
        part.apply(cut, split, t)
        t += 1
    return ThresholdTree(part.root, C.shape[1]), trace


# -- greedy min-mistake baseline ---------------------------------------------


def _best_mistake_cut(X, labels, C, pts, ctrs):
    """Lowest-mistake (dim, theta) at a node; ties -> lowest dim, then theta."""
    own = pts[np.isin(labels[pts], ctrs)]
    best = None
    for i in range(X.shape[1]):
        cvals = C[ctrs, i]
        cmin, cmax = cvals.min(), cvals.max()
        if cmin == cmax:
            continue
        vals = np.unique(np.concatenate([X[pts, i], cvals]))
        mids = (vals[:-1] + vals[1:]) / 2.0
        mids = mids[(mids >= cmin) & (mids < cmax)]
        if mids.size == 0:
            continue
        xi, ci = X[own, i], C[labels[own], i]
        lo = np.sort(np.minimum(xi, ci))
        hi = np.sort(np.maximum(xi, ci))
        mistakes = (np.searchsorted(lo, mids, side="right")
                    - np.searchsorted(hi, mids, side="right"))
        j = int(np.argmin(mistakes))
        if best is None or mistakes[j] < best[0]:
            best = (int(mistakes[j]), i, float(mids[j]))
    return best


def build_imm_min_cut(points, centers, p: float = 1.0,
                      labels: Optional[np.ndarray] = None) -> ThresholdTree:
    """Deterministic top-down tree: at each node pick the center-separating cut
    that separates the fewest points from their assigned centers.

    Points are assigned to their nearest center under ``||.||_p^p`` unless
    ``labels`` is given.
    """
    C = check_centers(centers)
    X = np.asarray(points, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] != C.shape[1]:
        raise InputError(f"incompatible points {X.shape} for centers {C.shape}")
    labels = nearest_centers(X, C, p) if labels is None else np.asarray(labels, dtype=np.int64)
    root = Node()
    stack = [(root, np.arange(X.shape[0]), np.arange(C.shape[0]))]
    while stack:
        node, pts, ctrs = stack.pop()
        if ctrs.size == 1:
            node.center = node.cluster = int(ctrs[0])
            continue
        best = _best_mistake_cut(X, labels, C, pts, ctrs)
        if best is None:
            raise InputError("no cut separates the centers of a node; centers must be distinct")
        _, i, theta = best
        node.dim, node.theta = i, theta
        node.left, node.right = Node(), Node()
        go_left = X[pts, i] <= theta
        c_left = C[ctrs, i] <= theta
        stack.append((node.right, pts[~go_left], ctrs[~c_left]))
        stack.append((node.left, pts[go_left], ctrs[c_left]))
    return ThresholdTree(root, C.shape[1])
