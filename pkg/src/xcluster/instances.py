"""Instance generators: the Z_m linear-function hard family, its min-cut-fooling
extension, Gaussian mixtures, and a plain reference-clustering heuristic."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .core import InputError, _check_p, nearest_centers, optimal_center, pairwise_pow_distances


@dataclass
class Instance:
    """Points plus (optional) reference centers and provenance.

    ``labels`` is the planted cluster of each point when the generator knows it.
    Duplicate points are stored as separate rows.
    """

    points: np.ndarray
    centers: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.points.shape[0])

    @property
    def d(self) -> int:
        return int(self.points.shape[1])

    @property
    def k(self) -> Optional[int]:
        return None if self.centers is None else int(self.centers.shape[0])


def is_prime(m: int) -> bool:
    """Trial division."""
    if m < 2:
        return False
    f = 2
    while f * f <= m:
        if m % f == 0:
            return False
        f += 1
    return True


def _check_family(m) -> int:
    if int(m) != m or not is_prime(int(m)) or m < 3:
        raise InputError(f"m must be a prime >= 3, got {m}")
    return int(m)


def lower_bound_centers(m: int) -> np.ndarray:
    """(m, m(m-1)) integer centers: coordinate i of center j is (a_i j + b_i) mod m.

    Dimensions are 0-indexed with a_i = 1 + i // m and b_i = i mod m, so the
    dimensions enumerate every pair (a, b) with a in 1..m-1, b in 0..m-1 once.
    Centers are j = 1..m.
    """
    m = _check_family(m)
    d = m * (m - 1)
    i = np.arange(d)
    a = 1 + i // m
    b = i % m
    j = np.arange(1, m + 1)
    return ((a[None, :] * j[:, None] + b[None, :]) % m).astype(float)


def _unit_offsets(C: np.ndarray, dims: int):
    """Points mu +- e^i for i < dims, cluster by cluster; returns (points, labels)."""
    k, D = C.shape
    eye = np.eye(D)[:dims]
    pts = np.concatenate([C[:, None, :] + eye[None], C[:, None, :] - eye[None]], axis=1)
    labels = np.repeat(np.arange(k), 2 * dims)
    return pts.reshape(-1, D), labels


def gen_lower_bound(m: int) -> Instance:
    """k = m, d = m(m-1), n = 2dk; every point at distance 1 from its center."""
    C = lower_bound_centers(m)
    k, d = C.shape
    X, labels = _unit_offsets(C, d)
    return Instance(X, C, labels, {
        "generator": "lower-bound", "params": {"m": int(m)}, "seed": None,
        "opt_cost": float(2 * d * k),
    })


def gen_adversarial(m: int) -> Instance:
    """Min-cut-fooling instance in d + k dimensions.

    Centers: first d coordinates are the hard-family centers mod 2, tail
    coordinate d + j is the indicator of center j. Cluster j holds the 2d points
    mu'^j +- e^i (i < d) and (k - 1) / 2 copies of mu'^j - e^(d+j).
    """
    base = lower_bound_centers(m)
    k, d = base.shape
    C = np.concatenate([base % 2, np.eye(k)], axis=1)
    X, labels = _unit_offsets(C, d)
    copies = (k - 1) // 2
    tail = np.repeat(C - np.eye(d + k)[d:], copies, axis=0)
    X = np.concatenate([X.reshape(k, 2 * d, d + k), tail.reshape(k, copies, d + k)], axis=1)
    labels = np.repeat(np.arange(k), 2 * d + copies)
    return Instance(X.reshape(-1, d + k), C, labels, {
        "generator": "adversarial", "params": {"m": int(m)}, "seed": None,
        "opt_cost": float(2 * d * k + (k - 1) * k // 2),
        "multiplicity": {"tail_copies_per_cluster": copies},
    })


def gen_gaussian_mixture(k: int, d: int, n_per_cluster: int, sigma: float,
                         rng: np.random.Generator, seed: Optional[int] = None) -> Instance:
    """k centers uniform in [0, 1]^d, each with ``n_per_cluster`` isotropic
    Gaussian points of standard deviation ``sigma``."""
    if k < 1 or d < 1 or n_per_cluster < 1:
        raise InputError("k, d and n_per_cluster must be positive")
    if not sigma > 0:
        raise InputError("sigma must be positive")
    C = rng.random((k, d))
    noise = rng.normal(0.0, sigma, size=(k, n_per_cluster, d))
    X = (C[:, None, :] + noise).reshape(-1, d)
    labels = np.repeat(np.arange(k), n_per_cluster)
    return Instance(X, C, labels, {
        "generator": "gaussian",
        "params": {"k": k, "d": d, "n": n_per_cluster, "sigma": float(sigma)},
        "seed": seed,
    })


def reference_centers(points, k: int, p: float, rng: np.random.Generator,
                      max_passes: int = 100, tol: float = 1e-6) -> np.ndarray:
    """Distance-weighted seeding followed by assign / recenter passes.

    Recentering uses the coordinate median (p = 1), mean (p = 2) or a 1-D
    convex search; stops when the relative improvement drops below ``tol``.
    """
    X = np.asarray(points, dtype=float)
    p = _check_p(p)
    n = X.shape[0]
    if n < k or k < 1:
        raise InputError(f"need n >= k >= 1, got n={n}, k={k}")
    idx = [int(rng.integers(n))]
    dist = pairwise_pow_distances(X, X[idx], p)[:, 0]
    for _ in range(1, k):
        total = dist.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=dist / total))
        else:
            nxt = int(rng.integers(n))
        idx.append(nxt)
        dist = np.minimum(dist, pairwise_pow_distances(X, X[[nxt]], p)[:, 0])
    C = X[idx].copy()
    prev = np.inf
    for _ in range(max_passes):
        D = pairwise_pow_distances(X, C, p)
        lab = np.argmin(D, axis=1)
        cost = float(D[np.arange(n), lab].sum())
        for j in range(k):
            members = X[lab == j]
            if members.shape[0]:
                C[j] = optimal_center(members, p)
        if prev - cost <= tol * max(prev, 1e-300) or cost == 0.0:
            break
        prev = cost
    return C


def planted_assignment(instance: Instance, p: float) -> np.ndarray:
    return nearest_centers(instance.points, instance.centers, p)
