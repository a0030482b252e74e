"""Random threshold cuts: uniform over the bounding box, the D_p interval law
with closed-form inverse-CDF thresholds, and the discard predicate."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .core import InputError, ThresholdCut, _check_p
from .geometry import BoundingBox, DimensionIntervalSet, warped_coordinates


def rng_stream(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for substream ``stream`` of ``seed``.

    Substreams derived from the same seed are statistically independent, so
    parallel runs stay reproducible regardless of scheduling.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


# -- uniform over the bounding box -------------------------------------------


def sample_uniform_cut(bbox: BoundingBox, rng: np.random.Generator) -> ThresholdCut:
    dims, thetas = sample_uniform_cuts(bbox, rng, 1)
    return ThresholdCut(int(dims[0]), float(thetas[0]))


def sample_uniform_cuts(bbox: BoundingBox, rng: np.random.Generator, size: int):
    """``size`` independent cuts with density 1/L over the box; returns (dims, thetas)."""
    L = bbox.total_length
    if not L > 0:
        raise InputError("bounding box has zero total length; no cut can split the centers")
    # one uniform on [0, L) located along the concatenated side lengths
    cum = np.cumsum(bbox.lengths)
    s = rng.random(size) * L
    dims = np.minimum(np.searchsorted(cum, s, side="right"), bbox.d - 1)
    start = cum[dims] - bbox.lengths[dims]
    thetas = bbox.lo[dims] + np.clip(s - start, 0.0, bbox.lengths[dims])
    return dims.astype(np.int64), thetas


# -- the P_{a,b} threshold law -------------------------------------------------


def theta_pdf(theta, a: float, b: float, p: float):
    """Density ``p 2^(p-1) / (b-a)^p * min(theta-a, b-theta)^(p-1)`` on [a, b]."""
    t = np.asarray(theta, dtype=float)
    w = b - a
    m = np.minimum(t - a, b - t)
    out = p * 2.0 ** (p - 1) / w ** p * np.power(np.maximum(m, 0.0), p - 1)
    return np.where((t >= a) & (t <= b), out, 0.0)


def theta_cdf(theta, a: float, b: float, p: float):
    t = np.clip(np.asarray(theta, dtype=float), a, b)
    w = b - a
    lower = 2.0 ** (p - 1) * ((t - a) / w) ** p
    upper = 1.0 - 2.0 ** (p - 1) * ((b - t) / w) ** p
    return np.where(t - a <= b - t, lower, upper)


def theta_inverse_cdf(a, b, p: float, u):
    """Exact inverse of :func:`theta_cdf`; vectorised over ``a``, ``b``, ``u``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = np.asarray(u, dtype=float)
    p = _check_p(p)
    if np.any(a >= b):
        raise InputError("theta_inverse_cdf needs a < b")
    if np.any((u < 0) | (u > 1)):
        raise InputError("u must lie in [0, 1]")
    w = b - a
    scale = 2.0 ** (1.0 - p)
    lo = a + w * np.power(u * scale, 1.0 / p)
    hi = b - w * np.power((1.0 - u) * scale, 1.0 / p)
    out = np.where(u <= 0.5, lo, hi)
    out = np.clip(out, a, b)
    return float(out) if out.ndim == 0 else out


# -- D_p over dimension-interval pairs ----------------------------------------


def sample_dp_cut(intervals: DimensionIntervalSet, rng: np.random.Generator) -> ThresholdCut:
    dims, thetas = sample_dp_cuts(intervals, rng, 1)
    return ThresholdCut(int(dims[0]), float(thetas[0]))


def sample_dp_cuts(intervals: DimensionIntervalSet, rng: np.random.Generator, size: int,
                   weights: Optional[np.ndarray] = None):
    """Pick entries with probability ``weight / total`` then a threshold by
    inverse CDF. ``weights`` overrides the stored ones (zero = removed)."""
    w = intervals.weights if weights is None else np.asarray(weights, dtype=float)
    cum = np.cumsum(w)
    total = cum[-1] if cum.size else 0.0
    if not total > 0:
        raise InputError("D_p has zero total weight; no cut can split the centers")
    s = rng.random(size) * total
    idx = np.searchsorted(cum, s, side="right")
    idx = np.minimum(idx, len(w) - 1)
    # guard against landing on a zero-weight entry at the float boundary
    while np.any(w[idx] == 0):
        bad = w[idx] == 0
        idx[bad] = np.searchsorted(cum, rng.random(int(bad.sum())) * total, side="right")
        idx = np.minimum(idx, len(w) - 1)
    u = rng.random(size)
    thetas = theta_inverse_cdf(intervals.a[idx], intervals.b[idx], intervals.p, u)
    return intervals.dims[idx].copy(), np.atleast_1d(thetas)


@dataclass(frozen=True)
class CutDistribution:
    """The active sampling law: ``uniform`` over the box or ``dp`` over intervals."""

    kind: str
    backing: Union[BoundingBox, DimensionIntervalSet]
    p: float = 1.0

    def __post_init__(self):
        if self.kind not in ("uniform", "dp"):
            raise InputError(f"unknown cut distribution {self.kind!r}")

    @property
    def total_mass(self) -> float:
        if self.kind == "uniform":
            return self.backing.total_length
        return self.backing.total_weight

    def sample(self, rng: np.random.Generator, size: int = 1):
        if self.kind == "uniform":
            return sample_uniform_cuts(self.backing, rng, size)
        return sample_dp_cuts(self.backing, rng, size)


# -- discard predicate ---------------------------------------------------------


def min_separated_pair(cut: ThresholdCut, leaves: Sequence[Sequence[int]], centers,
                       metric: str = "l1", p: float = 1.0,
                       warped: Optional[np.ndarray] = None) -> Optional[float]:
    """Smallest distance between two co-leaf centers that ``cut`` separates.

    ``metric`` is ``l1`` or ``pseudo_p``; the pseudo-distance is taken with
    respect to all centers (``warped`` may pass precomputed warped coordinates).
    Returns None when the cut separates no pair.
    """
    C = np.asarray(centers, dtype=float)
    if metric == "l1":
        Z = C
    elif metric == "pseudo_p":
        Z = warped if warped is not None else warped_coordinates(C, p)
    else:
        raise InputError(f"unknown metric {metric!r}")
    best = None
    for leaf in leaves:
        idx = np.asarray(leaf, dtype=np.int64)
        if idx.size < 2:
            continue
        left = C[idx, cut.dim] <= cut.theta
        if left.all() or not left.any():
            continue
        A, B = Z[idx[left]], Z[idx[~left]]
        dmin = float(np.abs(A[:, None, :] - B[None, :, :]).sum(axis=2).min())
        best = dmin if best is None else min(best, dmin)
    return best
