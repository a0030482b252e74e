"""Ground truth for tests: exhaustive optimal threshold trees on tiny inputs,
closed forms for the hard family, one-cut expected costs by quadrature, and
statistical goodness-of-fit verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate, stats

from .core import InputError, Node, ThresholdTree, _check_p, optimal_center, pow_abs
from .samplers import theta_pdf

MAX_K, MAX_D, MAX_N = 4, 3, 14


@dataclass
class OracleResult:
    cost: float
    """Optimal cost with cost-minimising leaf centers."""
    tree: ThresholdTree
    cost_reference: float
    """Optimal cost when each leaf is charged to its own reference center."""
    tree_reference: ThresholdTree
    explored: int
    """Distinct (point set, center set) subproblems solved."""


def _copy_tree(shape) -> Node:
    if shape[0] == "leaf":
        return Node(center=shape[1], cluster=shape[1])
    _, dim, theta, left, right = shape
    return Node(dim=dim, theta=theta, left=_copy_tree(left), right=_copy_tree(right))


def brute_force_opt_tree(points, centers, p: float) -> OracleResult:
    """Exhaustive search over threshold trees with one center per leaf.

    Within a node the cost only changes when theta crosses a coordinate of a
    point or center in that node, so midpoints between consecutive distinct
    coordinates cover every distinct split.
    """
    X = np.asarray(points, dtype=float)
    C = np.asarray(centers, dtype=float)
    p = _check_p(p)
    k, d = C.shape
    n = X.shape[0]
    if k > MAX_K or d > MAX_D or n > MAX_N:
        raise InputError(f"oracle refuses k={k}, d={d}, n={n}; limits are "
                         f"k <= {MAX_K}, d <= {MAX_D}, n <= {MAX_N}")
    if X.ndim != 2 or X.shape[1] != d:
        raise InputError("points and centers must share the dimension")
    memo: dict = {}

    def leaf_costs(pts: tuple, c: int):
        if not pts:
            return 0.0, 0.0
        M = X[list(pts)]
        ref = float(np.sum(pow_abs(M - C[c], p)))
        opt = float(np.sum(pow_abs(M - optimal_center(M, p), p)))
        return min(opt, ref), ref

    def solve(pts: tuple, ctrs: tuple):
        key = (pts, ctrs)
        if key in memo:
            return memo[key]
        if len(ctrs) == 1:
            opt, ref = leaf_costs(pts, ctrs[0])
            out = (opt, ("leaf", ctrs[0]), ref, ("leaf", ctrs[0]))
            memo[key] = out
            return out
        best_opt = best_ref = (math.inf, None)
        for i in range(d):
            vals = np.unique(np.concatenate([X[list(pts), i], C[list(ctrs), i]]))
            for theta in (vals[:-1] + vals[1:]) / 2.0:
                cl = tuple(c for c in ctrs if C[c, i] <= theta)
                if not cl or len(cl) == len(ctrs):
                    continue
                cr = tuple(c for c in ctrs if C[c, i] > theta)
                pl = tuple(x for x in pts if X[x, i] <= theta)
                pr = tuple(x for x in pts if X[x, i] > theta)
                lo, lt, lr, ltr = solve(pl, cl)
                ro, rt, rr, rtr = solve(pr, cr)
                if lo + ro < best_opt[0]:
                    best_opt = (lo + ro, ("cut", i, float(theta), lt, rt))
                if lr + rr < best_ref[0]:
                    best_ref = (lr + rr, ("cut", i, float(theta), ltr, rtr))
        out = (best_opt[0], best_opt[1], best_ref[0], best_ref[1])
        memo[key] = out
        return out

    opt, t_opt, ref, t_ref = solve(tuple(range(n)), tuple(range(k)))
    return OracleResult(opt, ThresholdTree(_copy_tree(t_opt), d), ref,
                        ThresholdTree(_copy_tree(t_ref), d), len(memo))


# -- hard-family closed forms --------------------------------------------------


def delta_p_pow(m: int, p: int) -> int:
    """Exact ``delta^p = 2 * sum_{i=1}^{m-1} (m - i) i^p`` for integer p."""
    return 2 * sum((m - i) * i ** p for i in range(1, m))


def delta_p(m: int, p: float) -> float:
    """Common pairwise center distance of the hard family with k = m."""
    if m < 2:
        raise InputError("m must be >= 2")
    p = _check_p(p)
    if float(p).is_integer():
        s = delta_p_pow(m, int(p))
        return float(s) if p == 1 else float(s) ** (1.0 / p)
    s = 2.0 * sum((m - i) * i ** p for i in range(1, m))
    return s ** (1.0 / p)


# -- expected cost of a single cut ---------------------------------------------


def expected_one_cut_cost(centers_1d, points_1d, p: float, dist: str = "uniform") -> float:
    """E[cost] of the tree made by one random cut between two 1-D centers.

    Points left of theta are charged to the lower center, the rest to the
    upper one; theta follows the uniform law or P_{a,b} on [a, b].
    """
    c = np.sort(np.asarray(centers_1d, dtype=float).ravel())
    x = np.asarray(points_1d, dtype=float).ravel()
    p = _check_p(p)
    if c.size != 2 or c[0] == c[1]:
        raise InputError("need exactly two distinct 1-D centers")
    a, b = float(c[0]), float(c[1])
    cost_left = pow_abs(x - a, p)
    cost_right = pow_abs(x - b, p)

    def cost(theta: float) -> float:
        return float(np.sum(np.where(x <= theta, cost_left, cost_right)))

    if dist == "uniform":
        density = lambda t: 1.0 / (b - a)
    elif dist == "dp":
        density = lambda t: float(theta_pdf(t, a, b, p))
    else:
        raise InputError(f"unknown cut law {dist!r}")
    breaks = sorted(set(x[(x > a) & (x < b)].tolist()) | {(a + b) / 2.0})
    edges = [a] + breaks + [b]
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi > lo:
            val, _ = integrate.quad(lambda t: cost(t) * density(t), lo, hi,
                                    epsrel=1e-8, epsabs=0.0, limit=200)
            total += val
    return total


# -- statistical verdicts ------------------------------------------------------


DEFAULT_ALPHA = 0.0027  # two-sided 3 sigma
MIN_SAMPLES = 10_000


@dataclass
class Verdict:
    test: str
    statistic: float
    pvalue: float
    passed: bool
    n: int
    detail: str = ""


Law = Union[Callable, np.ndarray, list, float]


def statistical_suite(samples, analytic_law: Law, alpha: float = DEFAULT_ALPHA) -> Verdict:
    """Goodness of fit of ``samples`` against ``analytic_law``.

    * callable CDF: Kolmogorov-Smirnov on continuous samples;
    * probability vector: chi-square on integer category samples;
    * float probability: binomial 3-sigma band on boolean samples.
    """
    s = np.asarray(samples)
    n = s.shape[0]
    if n < MIN_SAMPLES:
        raise InputError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if callable(analytic_law):
        res = stats.kstest(s.astype(float), analytic_law)
        return Verdict("ks", float(res.statistic), float(res.pvalue),
                       bool(res.pvalue >= alpha), n)
    if np.ndim(analytic_law) == 0:
        q = float(analytic_law)
        hits = float(np.sum(s.astype(bool)))
        sd = math.sqrt(n * q * (1 - q))
        z = (hits - n * q) / sd if sd > 0 else (0.0 if hits == n * q else math.inf)
        return Verdict("binomial", z, float(2 * stats.norm.sf(abs(z))), abs(z) <= 3.0, n,
                       f"observed {hits / n:.6g} vs {q:.6g}")
    probs = np.asarray(analytic_law, dtype=float)
    if not math.isclose(probs.sum(), 1.0, rel_tol=1e-9):
        raise InputError("category probabilities must sum to 1")
    counts = np.bincount(s.astype(np.int64), minlength=probs.size)
    if counts.size > probs.size:
        return Verdict("chi2", math.inf, 0.0, False, n, "sample outside the support")
    expected = probs * n
    keep = expected > 0
    if np.any(counts[~keep] > 0):
        return Verdict("chi2", math.inf, 0.0, False, n, "mass on a zero-probability category")
    res = stats.chisquare(counts[keep], expected[keep])
    return Verdict("chi2", float(res.statistic), float(res.pvalue), bool(res.pvalue >= alpha), n)


def theta_cdf_law(a: float, b: float, p: float) -> Callable:
    from .samplers import theta_cdf
    return lambda t: theta_cdf(t, a, b, p)


def exact_fraction(value: float) -> Fraction:
    return Fraction(value).limit_denominator(10 ** 12)
