"""Bounding boxes, center-projection interval decompositions and pseudo-distance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import InputError, pow_abs


@dataclass(frozen=True)
class BoundingBox:
    lo: np.ndarray
    hi: np.ndarray

    @property
    def lengths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def total_length(self) -> float:
        # np.sum is pairwise for contiguous input
        return float(np.sum(self.lengths))

    @property
    def d(self) -> int:
        return self.lo.shape[0]


def bounding_box(centers) -> BoundingBox:
    C = np.asarray(centers, dtype=float)
    if C.ndim != 2 or C.shape[0] < 1:
        raise InputError(f"centers must be a non-empty (k, d) array, got {C.shape}")
    return BoundingBox(C.min(axis=0), C.max(axis=0))


@dataclass(frozen=True)
class IntervalDecomposition:
    """Consecutive intervals between two coordinates, split at center projections."""

    dim: int
    intervals: tuple[tuple[float, float], ...]

    @property
    def length(self) -> float:
        return float(sum(b - a for a, b in self.intervals))

    def weight(self, p: float) -> float:
        if not self.intervals:
            return 0.0
        widths = np.array([b - a for a, b in self.intervals])
        return float(np.sum(pow_abs(widths, p)))


def interval_decomposition(dim: int, x: float, y: float, centers) -> IntervalDecomposition:
    """Split the segment between ``x`` and ``y`` along ``dim`` at the center
    projections lying strictly between them (coincident values merge)."""
    C = np.asarray(centers, dtype=float)
    lo, hi = (float(x), float(y)) if x <= y else (float(y), float(x))
    if not (np.isfinite(lo) and np.isfinite(hi)):
        raise InputError("interval endpoints must be finite")
    if lo == hi:
        return IntervalDecomposition(dim, ())
    proj = np.unique(C[:, dim])
    inner = proj[(proj > lo) & (proj < hi)]
    cuts = np.concatenate(([lo], inner, [hi]))
    return IntervalDecomposition(dim, tuple(zip(cuts[:-1].tolist(), cuts[1:].tolist())))


def pseudo_distance(x, y, centers, p: float) -> float:
    """Sum of ``|b - a| ** p`` over every dimension's interval decomposition."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    total = []
    for i in range(x.shape[0]):
        dec = interval_decomposition(i, x[i], y[i], centers)
        total.append(dec.weight(p))
    return float(np.sum(total))


@dataclass(frozen=True)
class DimensionIntervalSet:
    """All (dim, [a, b]) pairs delimited by consecutive distinct center projections.

    Entries are ordered by dimension then by ``a``; ``offsets[i]:offsets[i+1]``
    slices the entries of dimension ``i``.
    """

    dims: np.ndarray
    a: np.ndarray
    b: np.ndarray
    weights: np.ndarray
    offsets: np.ndarray
    p: float

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self) -> int:
        return int(self.dims.shape[0])


def all_intervals(centers, p: float) -> DimensionIntervalSet:
    C = np.asarray(centers, dtype=float)
    if C.ndim != 2 or C.shape[0] < 2:
        raise InputError("all_intervals needs at least two centers")
    dims, a, b, offsets = [], [], [], [0]
    for i in range(C.shape[1]):
        u = np.unique(C[:, i])
        dims.append(np.full(u.shape[0] - 1, i, dtype=np.int64))
        a.append(u[:-1])
        b.append(u[1:])
        offsets.append(offsets[-1] + u.shape[0] - 1)
    dims = np.concatenate(dims)
    if dims.shape[0] == 0:
        raise InputError("all centers coincide; no intervals to cut")
    a = np.concatenate(a)
    b = np.concatenate(b)
    return DimensionIntervalSet(dims, a, b, pow_abs(b - a, p), np.asarray(offsets), float(p))


def warped_coordinates(centers, p: float) -> np.ndarray:
    """Per-dimension monotone re-embedding ``Z`` of the centers such that
    ``sum_i |Z[g, i] - Z[h, i]|`` is the pseudo-distance between centers g and h.

    ``Z[c, i]`` is the cumulative ``|b - a| ** p`` of the projection intervals
    left of center ``c`` in dimension ``i``; for p = 1 this is ``C - C.min(0)``.
    """
    C = np.asarray(centers, dtype=float)
    Z = np.empty_like(C)
    for i in range(C.shape[1]):
        u, rank = np.unique(C[:, i], return_inverse=True)
        cum = np.concatenate(([0.0], np.cumsum(pow_abs(np.diff(u), p))))
        Z[:, i] = cum[rank]
    return Z


def pairwise_pseudo_distances(centers, p: float) -> np.ndarray:
    Z = warped_coordinates(centers, p)
    return np.abs(Z[:, None, :] - Z[None, :, :]).sum(axis=2)
