"""Near-linear-time machinery for the randomized builders.

Three structures, all indexed per dimension over the static rank space of the
center coordinates (``u[i]`` = sorted distinct coordinates, segment ``j`` =
``[u[i][j], u[i][j+1])``):

* ``LeafCoordinateIndex``: for every open leaf, its members sorted by
  (rank, id) in each dimension. A split enumerates the smaller side by a
  two-ended walk, re-sorts only that side, and lets the larger side keep its
  storage with the moved members left behind as tombstones (compacted once they
  outnumber the live entries).
* ``DimensionIntervalIndex``: a cover-count segment tree over segments (union
  length of the leaf extents, conditioned-uniform sampling, detection of
  segments that lost coverage) and a max-tree keyed by each leaf's lowest
  member that answers "which leaves does (i, theta) split" by stabbing.
* ``WeightedIntervalSegTree``: ``|b - a|^p`` weights over the same segments
  with removal, range sums and sampling by descent.

``build_fast`` wires them into the uniform, sample-discard and general-p
builders. It matches the reference builders in law, not per seed.
"""

from __future__ import annotations

import heapq
import math
from typing import Optional

import numpy as np
from numba import njit

from .builders import BuildTrace, DiscardLoopError, MAX_CONSECUTIVE_DISCARDS, TraceEntry
from .core import InputError, Node, ThresholdCut, ThresholdTree, _check_p, check_centers, pow_abs
from .geometry import bounding_box, warped_coordinates
from .samplers import theta_inverse_cdf


def _pow2_at_least(n: int) -> int:
    s = 1
    while s < n:
        s *= 2
    return s


# -- numba kernels: cover-count segment tree ---------------------------------


@njit(cache=True)
def _cover_pull(cnt, cov, full, unc, valid, i, node, S):
    if cnt[i, node] > 0:
        cov[i, node] = full[i, node]
        unc[i, node] = 0
    elif node >= S:
        cov[i, node] = 0.0
        unc[i, node] = valid[i, node - S]
    else:
        cov[i, node] = cov[i, 2 * node] + cov[i, 2 * node + 1]
        unc[i, node] = unc[i, 2 * node] + unc[i, 2 * node + 1]


@njit(cache=True)
def _cover_update(cnt, cov, full, unc, valid, i, l, r, delta, S):
    """Add ``delta`` to the cover count of segments ``[l, r)`` of dimension ``i``."""
    if l >= r:
        return
    lo = l + S
    hi = r + S
    while lo < hi:
        if lo & 1:
            cnt[i, lo] += delta
            _cover_pull(cnt, cov, full, unc, valid, i, lo, S)
            lo += 1
        if hi & 1:
            hi -= 1
            cnt[i, hi] += delta
            _cover_pull(cnt, cov, full, unc, valid, i, hi, S)
        lo >>= 1
        hi >>= 1
    n = (l + S) >> 1
    while n >= 1:
        _cover_pull(cnt, cov, full, unc, valid, i, n, S)
        n >>= 1
    n = (r - 1 + S) >> 1
    while n >= 1:
        _cover_pull(cnt, cov, full, unc, valid, i, n, S)
        n >>= 1


@njit(cache=True)
def _cover_locate(cnt, cov, full, i, s, S):
    """Segment holding covered mass ``s`` of dimension ``i``; returns (j, offset)."""
    node = 1
    inside = False
    while node < S:
        if not inside and cnt[i, node] > 0:
            inside = True
        left = 2 * node
        if inside:
            if s < full[i, left]:
                node = left
            else:
                s -= full[i, left]
                node = left + 1
        else:
            if s < cov[i, left]:
                node = left
            else:
                s -= cov[i, left]
                node = left + 1
    return node - S, s


@njit(cache=True)
def _cover_take_uncovered(cnt, unc, cov, full, valid, i, l, r, S, out):
    """Collect segments in ``[l, r)`` that are uncovered and still valid, then
    mark them invalid so each is reported once. Returns the count."""
    nout = 0
    stack = np.empty((64, 3), dtype=np.int64)
    top = 0
    stack[0, 0] = 1
    stack[0, 1] = 0
    stack[0, 2] = S
    top = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        nl = stack[top, 1]
        nr = stack[top, 2]
        if nr <= l or nl >= r or cnt[i, node] > 0 or unc[i, node] == 0:
            continue
        if node >= S:
            out[nout] = node - S
            nout += 1
            continue
        mid = (nl + nr) // 2
        stack[top, 0] = 2 * node
        stack[top, 1] = nl
        stack[top, 2] = mid
        top += 1
        stack[top, 0] = 2 * node + 1
        stack[top, 1] = mid
        stack[top, 2] = nr
        top += 1
    for t in range(nout):
        j = out[t]
        valid[i, j] = 0
        n = j + S
        while n >= 1:
            _cover_pull(cnt, cov, full, unc, valid, i, n, S)
            n >>= 1
    return nout


# -- numba kernels: max-tree for stabbing ------------------------------------


@njit(cache=True)
def _mx_set(mx, i, pos, val, K):
    n = pos + K
    mx[i, n] = val
    n >>= 1
    while n >= 1:
        a = mx[i, 2 * n]
        b = mx[i, 2 * n + 1]
        mx[i, n] = a if a > b else b
        n >>= 1


@njit(cache=True)
def _mx_stab(mx, leaf_at, i, P, j, K, out):
    """Leaves whose lowest member sits at a position <= P and whose highest
    rank exceeds ``j``; these are exactly the leaves split inside segment j."""
    nout = 0
    if P < 0:
        return 0
    stack = np.empty((64, 3), dtype=np.int64)
    stack[0, 0] = 1
    stack[0, 1] = 0
    stack[0, 2] = K
    top = 1
    while top > 0:
        top -= 1
        node = stack[top, 0]
        nl = stack[top, 1]
        nr = stack[top, 2]
        if nl > P or mx[i, node] <= j:
            continue
        if node >= K:
            out[nout] = leaf_at[i, node - K]
            nout += 1
            continue
        mid = (nl + nr) // 2
        stack[top, 0] = 2 * node + 1
        stack[top, 1] = mid
        stack[top, 2] = nr
        top += 1
        stack[top, 0] = 2 * node
        stack[top, 1] = nl
        stack[top, 2] = mid
        top += 1
    return nout


# -- numba kernels: weighted segment tree ------------------------------------


@njit(cache=True)
def _wt_set(wt, i, j, val, S):
    n = j + S
    wt[i, n] = val
    n >>= 1
    while n >= 1:
        wt[i, n] = wt[i, 2 * n] + wt[i, 2 * n + 1]
        n >>= 1


@njit(cache=True)
def _wt_locate(wt, i, s, S):
    node = 1
    while node < S:
        left = 2 * node
        if s < wt[i, left]:
            node = left
        else:
            s -= wt[i, left]
            node = left + 1
    return node - S


@njit(cache=True)
def _wt_range_sum(wt, i, l, r, S):
    total = 0.0
    lo = l + S
    hi = r + S
    while lo < hi:
        if lo & 1:
            total += wt[i, lo]
            lo += 1
        if hi & 1:
            hi -= 1
            total += wt[i, hi]
        lo >>= 1
        hi >>= 1
    return total


# -- numba kernels: per-leaf sorted members ----------------------------------


@njit(cache=True)
def _leaf_split(pool, head, tail, lstart, lend, live, dead, leaf_of, R, gpos, gorder,
                b, i, j, s, top, bufL, bufR, keys):
    """Split leaf ``b`` at segment ``j`` of dimension ``i``.

    The side found first by a two-ended walk (the smaller one, up to one
    element) moves to new leaf ``s`` stored at ``pool[:, top:top+m]``; leaf
    ``b`` keeps the rest. Returns (m, moved_side_is_left).
    """
    d = pool.shape[0]
    p = head[i, b]
    q = tail[i, b]
    nl = 0
    nr = 0
    left_done = False
    while True:
        while leaf_of[pool[i, p]] != b:
            p += 1
        c = pool[i, p]
        if R[i, c] <= j:
            bufL[nl] = c
            nl += 1
            p += 1
        else:
            left_done = True
            break
        while leaf_of[pool[i, q]] != b:
            q -= 1
        c = pool[i, q]
        if R[i, c] > j:
            bufR[nr] = c
            nr += 1
            q -= 1
        else:
            break
    if left_done:
        m = nl
        for t in range(m):
            pool[i, top + t] = bufL[t]
    else:
        m = nr
        for t in range(m):
            pool[i, top + t] = bufR[m - 1 - t]
    for t in range(m):
        leaf_of[pool[i, top + t]] = s
    for i2 in range(d):
        if i2 == i:
            continue
        for t in range(m):
            keys[t] = gpos[i2, pool[i, top + t]]
        ks = np.sort(keys[:m])
        for t in range(m):
            pool[i2, top + t] = gorder[i2, ks[t]]
    lstart[s] = top
    lend[s] = top + m
    for i2 in range(d):
        head[i2, s] = top
        tail[i2, s] = top + m - 1
    live[s] = m
    dead[s] = 0
    live[b] -= m
    dead[b] += m
    if dead[b] > live[b]:
        for i2 in range(d):
            w = lstart[b]
            for t in range(lstart[b], lend[b]):
                c = pool[i2, t]
                if leaf_of[c] == b:
                    pool[i2, w] = c
                    w += 1
        lend[b] = lstart[b] + live[b]
        dead[b] = 0
        for i2 in range(d):
            head[i2, b] = lstart[b]
            tail[i2, b] = lend[b] - 1
    else:
        for i2 in range(d):
            h = head[i2, b]
            while leaf_of[pool[i2, h]] != b:
                h += 1
            head[i2, b] = h
            t2 = tail[i2, b]
            while leaf_of[pool[i2, t2]] != b:
                t2 -= 1
            tail[i2, b] = t2
    return m, left_done


@njit(cache=True)
def _index_leaf(cnt, cov, full, unc, valid, mx, leaf_at, pool, head, tail, R, gpos,
                x, delta, S, K):
    """Insert (delta=+1) or withdraw (delta=-1) leaf ``x`` from the interval index."""
    d = pool.shape[0]
    for i in range(d):
        cmin = pool[i, head[i, x]]
        cmax = pool[i, tail[i, x]]
        _cover_update(cnt, cov, full, unc, valid, i, R[i, cmin], R[i, cmax], delta, S)
        if delta > 0:
            _mx_set(mx, i, gpos[i, cmin], R[i, cmax], K)
            leaf_at[i, gpos[i, cmin]] = x
        else:
            _mx_set(mx, i, gpos[i, cmin], -1, K)


@njit(cache=True)
def _apply_split(pool, head, tail, lstart, lend, live, dead, leaf_of, R, gpos, gorder,
                 cnt, cov, full, unc, valid, mx, leaf_at, wt, track_removed,
                 b, i, j, s, top, bufL, bufR, keys, removed, S, K):
    """One full split of leaf ``b``: withdraw it from the interval index, split
    its member lists, index the non-singleton children and, when
    ``track_removed``, zero the weights of segments that lost all coverage.

    Returns (m, moved_side_is_left, n_removed); removed segments are written
    to ``removed`` as (dim, j) rows.
    """
    d = pool.shape[0]
    lo_rank = np.empty(d, dtype=np.int64)
    hi_rank = np.empty(d, dtype=np.int64)
    for i2 in range(d):
        lo_rank[i2] = R[i2, pool[i2, head[i2, b]]]
        hi_rank[i2] = R[i2, pool[i2, tail[i2, b]]]
    _index_leaf(cnt, cov, full, unc, valid, mx, leaf_at, pool, head, tail, R, gpos, b, -1, S, K)
    m, moved_left = _leaf_split(pool, head, tail, lstart, lend, live, dead, leaf_of, R, gpos,
                                gorder, b, i, j, s, top, bufL, bufR, keys)
    if live[b] >= 2:
        _index_leaf(cnt, cov, full, unc, valid, mx, leaf_at, pool, head, tail, R, gpos, b, 1, S, K)
    if live[s] >= 2:
        _index_leaf(cnt, cov, full, unc, valid, mx, leaf_at, pool, head, tail, R, gpos, s, 1, S, K)
    nrem = 0
    if track_removed:
        seg = np.empty(S, dtype=np.int64)
        for i2 in range(d):
            got = _cover_take_uncovered(cnt, unc, cov, full, valid, i2, lo_rank[i2],
                                        hi_rank[i2], S, seg)
            for t in range(got):
                _wt_set(wt, i2, seg[t], 0.0, S)
                removed[nrem, 0] = i2
                removed[nrem, 1] = seg[t]
                nrem += 1
    return m, moved_left, nrem


@njit(cache=True)
def _boundary_pair(pool, head, tail, leaf_of, R, b, i, j):
    """(last member with rank <= j, first member with rank > j) of leaf ``b`` in dim ``i``."""
    lo = head[i, b]
    hi = tail[i, b] + 1
    while lo < hi:
        mid = (lo + hi) // 2
        if R[i, pool[i, mid]] <= j:
            lo = mid + 1
        else:
            hi = mid
    q = lo
    while leaf_of[pool[i, q]] != b:
        q += 1
    p = lo - 1
    while leaf_of[pool[i, p]] != b:
        p -= 1
    return pool[i, p], pool[i, q]


@njit(cache=True)
def _l1_diameter(Z):
    """Exact l1 diameter: pair scan for small sets, else the 2^(d-1) sign-vector
    identity max_s (max s.z - min s.z)."""
    n, d = Z.shape
    if n < 2:
        return 0.0
    best = 0.0
    if n * (n - 1) // 2 <= n * (1 << (d - 1)) or d > 20:
        for a in range(n - 1):
            for b in range(a + 1, n):
                acc = 0.0
                for t in range(d):
                    acc += abs(Z[a, t] - Z[b, t])
                if acc > best:
                    best = acc
        return best
    for mask in range(1 << (d - 1)):
        vmax = -np.inf
        vmin = np.inf
        for a in range(n):
            v = Z[a, 0]
            for t in range(1, d):
                if (mask >> (t - 1)) & 1:
                    v -= Z[a, t]
                else:
                    v += Z[a, t]
            if v > vmax:
                vmax = v
            if v < vmin:
                vmin = v
        if vmax - vmin > best:
            best = vmax - vmin
    return best


@njit(cache=True)
def _l1_min_cross(A, B):
    best = np.inf
    for a in range(A.shape[0]):
        for b in range(B.shape[0]):
            acc = 0.0
            for t in range(A.shape[1]):
                acc += abs(A[a, t] - B[b, t])
                if acc >= best:
                    break
            if acc < best:
                best = acc
    return best


# -- Python-facing structures ------------------------------------------------


class _RankSpace:
    """Static per-dimension rank data of the centers."""

    def __init__(self, C: np.ndarray):
        k, d = C.shape
        self.k, self.d = k, d
        self.C = C
        self.R = np.empty((d, k), dtype=np.int64)
        self.nu = np.empty(d, dtype=np.int64)
        self.u = np.full((d, k), np.inf)
        for i in range(d):
            u, inv = np.unique(C[:, i], return_inverse=True)
            self.R[i] = inv
            self.nu[i] = u.size
            self.u[i, :u.size] = u
        # (rank, id) order per dimension and each center's position in it
        self.gorder = np.argsort(self.R, axis=1, kind="stable").astype(np.int64)
        self.gpos = np.empty_like(self.gorder)
        rows = np.arange(d)[:, None]
        self.gpos[rows, self.gorder] = np.arange(k)[None, :]
        # number of centers with rank <= j
        self.cum = np.zeros((d, k), dtype=np.int64)
        for i in range(d):
            counts = np.bincount(self.R[i], minlength=k)
            self.cum[i] = np.cumsum(counts)
        self.S = _pow2_at_least(max(1, k - 1))
        self.K = _pow2_at_least(k)
        self.seg_len = np.zeros((d, self.S))
        for i in range(d):
            n = self.nu[i] - 1
            self.seg_len[i, :n] = np.diff(self.u[i, :self.nu[i]])

    def segment_of(self, dim: int, theta: float) -> int:
        """Index j with u[j] <= theta < u[j+1]; -1 or nu-1 when outside."""
        return int(np.searchsorted(self.u[dim, :self.nu[dim]], theta, side="right")) - 1


class LeafCoordinateIndex:
    """Per-leaf member lists sorted by coordinate in every dimension.

    Leaf 0 starts with all centers; every split creates one new leaf id for the
    moved (smaller) side while the other side keeps the split leaf's id.
    """

    def __init__(self, centers, ranks: Optional[_RankSpace] = None):
        C = check_centers(centers)
        self.ranks = ranks or _RankSpace(C)
        k, d = self.ranks.k, self.ranks.d
        cap = k * (int(math.log2(max(k, 2))) + 3)
        self.pool = np.zeros((d, cap), dtype=np.int64)
        self.pool[:, :k] = self.ranks.gorder
        self.head = np.zeros((d, k), dtype=np.int64)
        self.tail = np.full((d, k), k - 1, dtype=np.int64)
        self.lstart = np.zeros(k, dtype=np.int64)
        self.lend = np.zeros(k, dtype=np.int64)
        self.lend[0] = k
        self.live = np.zeros(k, dtype=np.int64)
        self.live[0] = k
        self.dead = np.zeros(k, dtype=np.int64)
        self.leaf_of = np.zeros(k, dtype=np.int64)
        self.top = k
        self.n_leaves = 1
        self._bufL = np.empty(k, dtype=np.int64)
        self._bufR = np.empty(k, dtype=np.int64)
        self._keys = np.empty(k, dtype=np.int64)

    def size(self, leaf: int) -> int:
        return int(self.live[leaf])

    def members(self, leaf: int) -> np.ndarray:
        block = self.pool[0, self.lstart[leaf]:self.lend[leaf]]
        return block[self.leaf_of[block] == leaf]

    def sorted_members(self, leaf: int, dim: int) -> np.ndarray:
        block = self.pool[dim, self.lstart[leaf]:self.lend[leaf]]
        return block[self.leaf_of[block] == leaf]

    def extent(self, leaf: int, dim: int) -> tuple[float, float]:
        C = self.ranks.C
        return (float(C[self.pool[dim, self.head[dim, leaf]], dim]),
                float(C[self.pool[dim, self.tail[dim, leaf]], dim]))

    def _reserve(self, leaf: int) -> None:
        need = self.top + int(self.live[leaf])
        if need > self.pool.shape[1]:
            grow = np.zeros((self.pool.shape[0], max(need, 2 * self.pool.shape[1])), dtype=np.int64)
            grow[:, :self.top] = self.pool[:, :self.top]
            self.pool = grow

    def _check_split(self, leaf: int, cut: ThresholdCut) -> int:
        j = self.ranks.segment_of(cut.dim, cut.theta)
        lo, hi = self.extent(leaf, cut.dim)
        if not (lo <= cut.theta < hi):
            raise ValueError(f"cut {cut} does not split leaf {leaf}")
        return j

    def split_leaf(self, leaf: int, cut: ThresholdCut) -> tuple[int, int]:
        """Split ``leaf`` by ``cut``; returns (left leaf id, right leaf id)."""
        j = self._check_split(leaf, cut)
        self._reserve(leaf)
        r = self.ranks
        s = self.n_leaves
        m, moved_left = _leaf_split(self.pool, self.head, self.tail, self.lstart, self.lend,
                                    self.live, self.dead, self.leaf_of, r.R, r.gpos, r.gorder,
                                    leaf, cut.dim, j, s, self.top, self._bufL, self._bufR,
                                    self._keys)
        self.top += m
        self.n_leaves += 1
        return (s, leaf) if moved_left else (leaf, s)

    def check(self) -> None:
        """Exact consistency checks against a recount (debug)."""
        R = self.ranks.R
        for leaf in range(self.n_leaves):
            ref = np.flatnonzero(self.leaf_of == leaf)
            if ref.size != self.live[leaf]:
                raise AssertionError(f"leaf {leaf}: live count {self.live[leaf]} != {ref.size}")
            for i in range(self.ranks.d):
                got = self.sorted_members(leaf, i)
                if got.size != ref.size or set(got.tolist()) != set(ref.tolist()):
                    raise AssertionError(f"leaf {leaf} dim {i}: member list out of sync")
                keys = R[i, got] * self.ranks.k + got
                if np.any(np.diff(keys) <= 0):
                    raise AssertionError(f"leaf {leaf} dim {i}: not sorted by (rank, id)")


class DimensionIntervalIndex:
    """Union-length and stabbing structure over the open leaves' extents."""

    def __init__(self, leaves: LeafCoordinateIndex):
        self.leaves = leaves
        r = leaves.ranks
        d, S, K = r.d, r.S, r.K
        self.cnt = np.zeros((d, 2 * S), dtype=np.int64)
        self.cov = np.zeros((d, 2 * S))
        self.full = np.zeros((d, 2 * S))
        self.full[:, S:] = r.seg_len
        for n in range(S - 1, 0, -1):
            self.full[:, n] = self.full[:, 2 * n] + self.full[:, 2 * n + 1]
        self.valid = np.zeros((d, S), dtype=np.int64)
        for i in range(d):
            self.valid[i, :r.nu[i] - 1] = 1
        self.unc = np.zeros((d, 2 * S), dtype=np.int64)
        self.unc[:, S:] = self.valid
        for n in range(S - 1, 0, -1):
            self.unc[:, n] = self.unc[:, 2 * n] + self.unc[:, 2 * n + 1]
        self.mx = np.full((d, 2 * K), -1, dtype=np.int64)
        self.leaf_at = np.full((d, K), -1, dtype=np.int64)
        self._out = np.empty(r.k, dtype=np.int64)
        for leaf in range(leaves.n_leaves):
            if leaves.live[leaf] >= 2:
                self._index(leaf, 1)

    def _index(self, leaf: int, delta: int) -> None:
        L, r = self.leaves, self.leaves.ranks
        _index_leaf(self.cnt, self.cov, self.full, self.unc, self.valid, self.mx, self.leaf_at,
                    L.pool, L.head, L.tail, r.R, r.gpos, leaf, delta, r.S, r.K)

    def union_length(self, dim: int) -> float:
        return float(self.cov[dim, 1])

    @property
    def total_union(self) -> float:
        return float(np.sum(self.cov[:, 1]))

    def stab_split_leaves(self, cut: ThresholdCut) -> list[int]:
        r = self.leaves.ranks
        j = r.segment_of(cut.dim, cut.theta)
        return self._stab(cut.dim, j)

    def _stab(self, dim: int, j: int) -> list[int]:
        r = self.leaves.ranks
        if j < 0 or j >= r.nu[dim] - 1:
            return []
        n = _mx_stab(self.mx, self.leaf_at, dim, r.cum[dim, j] - 1, j, r.K, self._out)
        return self._out[:n].tolist()

    def split(self, leaf: int, cut: ThresholdCut) -> tuple[int, int]:
        """Split ``leaf`` in both indexes; returns (left leaf id, right leaf id)."""
        L = self.leaves
        L._check_split(leaf, cut)
        self._index(leaf, -1)
        left, right = L.split_leaf(leaf, cut)
        for x in (left, right):
            if L.live[x] >= 2:
                self._index(x, 1)
        return left, right

    def locate(self, s: float):
        """Dimension, segment and offset holding covered mass ``s`` in [0, total_union)."""
        tot = self.cov[:, 1]
        cum = np.cumsum(tot)
        i = min(int(np.searchsorted(cum, s, side="right")), len(cum) - 1)
        while tot[i] == 0 and i > 0:
            i -= 1
        rem = s - (cum[i] - tot[i])
        j, off = _cover_locate(self.cnt, self.cov, self.full, i, min(max(rem, 0.0), tot[i]),
                               self.leaves.ranks.S)
        return i, int(j), off

    def sample_conditioned_uniform(self, rng: np.random.Generator) -> ThresholdCut:
        return sample_conditioned_uniform(self, rng)

    def check(self) -> None:
        """Union lengths and stabbing sets against brute force (debug)."""
        L, r = self.leaves, self.leaves.ranks
        open_leaves = [x for x in range(L.n_leaves) if L.live[x] >= 2]
        for i in range(r.d):
            lo = np.array([L.extent(x, i)[0] for x in open_leaves])
            hi = np.array([L.extent(x, i)[1] for x in open_leaves])
            ref = _brute_union(lo, hi)
            if not math.isclose(ref, self.cov[i, 1], rel_tol=1e-9, abs_tol=1e-12):
                raise AssertionError(f"dim {i}: union {self.cov[i, 1]} != brute force {ref}")
            for j in range(r.nu[i] - 1):
                theta = r.u[i, j]
                want = sorted(x for x, a, b in zip(open_leaves, lo, hi) if a <= theta < b)
                if sorted(self._stab(i, j)) != want:
                    raise AssertionError(f"dim {i} segment {j}: stabbing set mismatch")


def _brute_union(lo: np.ndarray, hi: np.ndarray) -> float:
    if lo.size == 0:
        return 0.0
    order = np.argsort(lo)
    total, cur_lo, cur_hi = 0.0, lo[order[0]], hi[order[0]]
    for t in order[1:]:
        if lo[t] > cur_hi:
            total += cur_hi - cur_lo
            cur_lo, cur_hi = lo[t], hi[t]
        else:
            cur_hi = max(cur_hi, hi[t])
    return total + cur_hi - cur_lo


def stab_split_leaves(index: DimensionIntervalIndex, cut: ThresholdCut) -> list[int]:
    return index.stab_split_leaves(cut)


def sample_conditioned_uniform(index: DimensionIntervalIndex, rng: np.random.Generator) -> ThresholdCut:
    """Uniform cut over the union of open-leaf extents (cuts that split a leaf)."""
    total = index.total_union
    if not total > 0:
        raise InputError("no open leaf left to split")
    r = index.leaves.ranks
    while True:
        i, j, off = index.locate(rng.random() * total)
        seg = r.seg_len[i, j]
        if seg > 0:
            theta = r.u[i, j] + min(off, seg)
            theta = min(theta, np.nextafter(r.u[i, j + 1], -np.inf))
            return ThresholdCut(i, float(theta))


class WeightedIntervalSegTree:
    """Per-dimension segment trees of ``|b - a|^p`` over consecutive center
    projections, supporting removal, range sums and weighted sampling."""

    def __init__(self, centers, p: float, ranks: Optional[_RankSpace] = None):
        C = check_centers(centers)
        self.p = _check_p(p)
        self.ranks = ranks or _RankSpace(C)
        r = self.ranks
        S = r.S
        self.wt = np.zeros((r.d, 2 * S))
        self.wt[:, S:] = pow_abs(r.seg_len, self.p)
        for n in range(S - 1, 0, -1):
            self.wt[:, n] = self.wt[:, 2 * n] + self.wt[:, 2 * n + 1]

    def weight(self, dim: int, j: int) -> float:
        return float(self.wt[dim, self.ranks.S + j])

    def remove(self, dim: int, j: int) -> None:
        _wt_set(self.wt, dim, j, 0.0, self.ranks.S)

    def range_sum(self, dim: int, l: int, r: int) -> float:
        return float(_wt_range_sum(self.wt, dim, l, r, self.ranks.S))

    @property
    def total(self) -> float:
        return float(np.sum(self.wt[:, 1]))

    def locate(self, s: float) -> tuple[int, int]:
        tot = self.wt[:, 1]
        cum = np.cumsum(tot)
        i = min(int(np.searchsorted(cum, s, side="right")), len(cum) - 1)
        while tot[i] == 0 and i > 0:
            i -= 1
        rem = min(max(s - (cum[i] - tot[i]), 0.0), tot[i])
        return i, int(_wt_locate(self.wt, i, rem, self.ranks.S))

    def check(self) -> None:
        S = self.ranks.S
        for i in range(self.ranks.d):
            leaves = self.wt[i, S:]
            if not math.isclose(self.wt[i, 1], float(np.sum(leaves)), rel_tol=1e-9, abs_tol=1e-300):
                raise AssertionError(f"dim {i}: tree total differs from linear scan")


def sample_dp_fast(segtrees: WeightedIntervalSegTree, rng: np.random.Generator) -> ThresholdCut:
    """Live interval with probability weight / total, then an inverse-CDF threshold."""
    total = segtrees.total
    if not total > 0:
        raise InputError("no live interval left")
    r = segtrees.ranks
    while True:
        i, j = segtrees.locate(rng.random() * total)
        if segtrees.weight(i, j) > 0:
            theta = theta_inverse_cdf(r.u[i, j], r.u[i, j + 1], segtrees.p, rng.random())
            return ThresholdCut(i, float(theta))


# -- fast builder --------------------------------------------------------------


VARIANTS = ("uniform", "modified", "lp")


def build_fast(centers, p: float, rng: np.random.Generator, variant: str = "uniform",
               ell: int = 4, debug: bool = False) -> tuple[ThresholdTree, BuildTrace]:
    """Fast counterpart of build_uniform / build_modified / build_lp.

    ``p`` is only used by the ``lp`` variant. With ``debug`` every split batch
    is followed by exact structural cross-checks.
    """
    if variant not in VARIANTS:
        raise InputError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    C = check_centers(centers)
    p = _check_p(p)
    if variant != "uniform" and (int(ell) != ell or ell < 4):
        raise InputError(f"ell must be an integer >= 4, got {ell}")
    k, d = C.shape
    metric = "pseudo_p" if variant == "lp" else "l1"
    if k == 1:
        return ThresholdTree(Node(center=0, cluster=0), d), BuildTrace(metric=metric)
    return _FastBuild(C, p, variant, int(ell), debug).run(rng)


class _FastBuild:
    def __init__(self, C, p, variant, ell, debug):
        self.C, self.p, self.variant, self.debug = C, p, variant, debug
        self.k, self.d = C.shape
        self.ranks = _RankSpace(C)
        self.L = LeafCoordinateIndex(C, self.ranks)
        self.I = DimensionIntervalIndex(self.L)
        self.lp = variant == "lp"
        self.W = WeightedIntervalSegTree(C, p, self.ranks) if self.lp else None
        self.Z = warped_coordinates(C, p) if self.lp else C
        self.discard = variant != "uniform"
        self.kl = float(self.k) ** ell
        self.mass = self.W.total if self.lp else bounding_box(C).total_length
        self.removed = np.empty((max(1, self.d * self.ranks.S), 2), dtype=np.int64)
        self.root = Node()
        self.node_of: list[Optional[Node]] = [self.root] + [None] * (self.k - 1)
        self.open = {0}
        self.version = np.zeros(self.k, dtype=np.int64)
        self.exact: dict[int, float] = {}
        self.heap: list = []
        if self.discard:
            self._push(0)

    # c_max bookkeeping: extent sums bound each leaf's diameter from above
    def _extent_sum(self, leaf: int) -> tuple[float, float]:
        L, Z, dims = self.L, self.Z, np.arange(self.d)
        lo = Z[L.pool[dims, L.head[dims, leaf]], dims]
        hi = Z[L.pool[dims, L.tail[dims, leaf]], dims]
        ext = hi - lo
        return float(np.sum(ext)), float(np.max(ext))

    def _push(self, leaf: int) -> None:
        ub, lb = self._extent_sum(leaf)
        heapq.heappush(self.heap, (-ub, leaf, int(self.version[leaf]), lb))

    def _cmax_bounds(self) -> tuple[float, float]:
        while self.heap:
            negub, leaf, ver, lb = self.heap[0]
            if ver == self.version[leaf] and leaf in self.open:
                return -negub, max(lb, 0.0)
            heapq.heappop(self.heap)
        return 0.0, 0.0

    def _exact_diameter(self, leaf: int) -> float:
        if leaf not in self.exact:
            self.exact[leaf] = float(_l1_diameter(np.ascontiguousarray(self.Z[self.L.members(leaf)])))
        return self.exact[leaf]

    def _exact_cmax(self) -> float:
        return max((self._exact_diameter(x) for x in self.open), default=0.0)

    def _min_cross(self, leaf: int, cut: ThresholdCut) -> float:
        mem = self.L.members(leaf)
        left = self.C[mem, cut.dim] <= cut.theta
        return float(_l1_min_cross(np.ascontiguousarray(self.Z[mem[left]]),
                                   np.ascontiguousarray(self.Z[mem[~left]])))

    def _keep(self, cut: ThresholdCut, j: int, leaves: list[int]):
        """Discard decision with lazy bounds; returns (accept, cmax or None)."""
        ub, lb = self._cmax_bounds()
        L, r = self.L, self.ranks
        gap = math.inf
        for x in leaves:
            a, b = _boundary_pair(L.pool, L.head, L.tail, L.leaf_of, r.R, x, cut.dim, j)
            gap = min(gap, self.Z[b, cut.dim] - self.Z[a, cut.dim])
        if gap > ub / self.kl:
            return True, None
        sep = min(self._min_cross(x, cut) for x in leaves)
        if sep > ub / self.kl:
            return True, None
        if sep <= lb / self.kl:
            return False, None
        cmax = self._exact_cmax()
        return sep > cmax / self.kl, cmax

    def _sample(self, rng):
        r = self.ranks
        if self.lp:
            cut = sample_dp_fast(self.W, rng)
            live = self.W.total
        else:
            cut = sample_conditioned_uniform(self.I, rng)
            live = self.I.total_union
        draws = int(rng.geometric(min(1.0, live / self.mass)))
        return cut, r.segment_of(cut.dim, cut.theta), draws

    def _split(self, leaf: int, cut: ThresholdCut, j: int, t: int) -> None:
        L, I, r = self.L, self.I, self.ranks
        L._reserve(leaf)
        s = L.n_leaves
        wt = self.W.wt if self.lp else np.zeros((1, 1))
        m, moved_left, _ = _apply_split(
            L.pool, L.head, L.tail, L.lstart, L.lend, L.live, L.dead, L.leaf_of, r.R, r.gpos,
            r.gorder, I.cnt, I.cov, I.full, I.unc, I.valid, I.mx, I.leaf_at, wt, self.lp,
            leaf, cut.dim, j, s, L.top, L._bufL, L._bufR, L._keys, self.removed, r.S, r.K)
        L.top += m
        L.n_leaves += 1
        node = self.node_of[leaf]
        node.dim, node.theta = int(cut.dim), float(cut.theta)
        node.left, node.right = Node(), Node()
        moved, kept = (node.left, node.right) if moved_left else (node.right, node.left)
        self.node_of[s], self.node_of[leaf] = moved, kept
        self.version[leaf] += 1
        self.exact.pop(leaf, None)
        for x in (leaf, s):
            if L.live[x] == 1:
                c = int(L.pool[0, L.head[0, x]])
                self.node_of[x].center = self.node_of[x].cluster = c
                self.open.discard(x)
            else:
                self.open.add(x)
                if self.discard:
                    self._push(x)

    def run(self, rng):
        trace = BuildTrace(total_mass=self.mass, metric="pseudo_p" if self.lp else "l1")
        t = consecutive = 0
        while self.open:
            cut, j, draws = self._sample(rng)
            leaves = self.I._stab(cut.dim, j)
            if not leaves:
                trace.resampled += 1
                continue
            cmax = None
            if self.discard:
                keep, cmax = self._keep(cut, j, leaves)
                if not keep:
                    consecutive += 1
                    if consecutive >= MAX_CONSECUTIVE_DISCARDS:
                        raise DiscardLoopError(f"{consecutive} consecutive discards")
                    trace.entries.append(TraceEntry(t, cut, False, 0, cmax, draws))
                    t += 1
                    continue
            consecutive = 0
            trace.entries.append(TraceEntry(t, cut, True, len(leaves), cmax, draws))
            for leaf in leaves:
                self._split(leaf, cut, j, t)
            t += 1
            if self.debug:
                self.L.check()
                self.I.check()
                if self.lp:
                    self.W.check()
                    self._check_liveness()
        return ThresholdTree(self.root, self.d), trace

    def _check_liveness(self) -> None:
        r, L = self.ranks, self.L
        for i in range(self.d):
            for j in range(r.nu[i] - 1):
                a = r.u[i, j]
                want = any(L.extent(x, i)[0] <= a < L.extent(x, i)[1] for x in self.open)
                if (self.W.weight(i, j) > 0) != want:
                    raise AssertionError(f"dim {i} segment {j}: liveness out of sync")
