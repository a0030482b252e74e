import numpy as np
import pytest
from scipy import stats

from xcluster.core import InputError, ThresholdCut
from xcluster.geometry import all_intervals, bounding_box, pseudo_distance
from xcluster.samplers import (CutDistribution, min_separated_pair, rng_stream, sample_dp_cut, sample_dp_cuts,
                               sample_uniform_cut, sample_uniform_cuts, theta_cdf, theta_inverse_cdf, theta_pdf)


def sigma_band(q, n):
    return 3 * np.sqrt(q * (1 - q) / n)


def separation_freq(dims, thetas, C, g, h):
    lo = np.minimum(C[g], C[h])[dims]
    hi = np.maximum(C[g], C[h])[dims]
    return np.mean((thetas >= lo) & (thetas < hi))


def test_rng_stream_determinism():
    a = rng_stream(7, 3).random(1000)
    b = rng_stream(7, 3).random(1000)
    c = rng_stream(7, 4).random(1000)
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, c)


def test_uniform_cut_k2_always_separates(rng):
    C = np.array([[0.0, 3.0], [1.0, 1.0]])
    dims, thetas = sample_uniform_cuts(bounding_box(C), rng, 10_000)
    assert separation_freq(dims, thetas, C, 0, 1) == 1.0


def test_uniform_cut_dimension_law(rng):
    bb = bounding_box([[0, 0], [1, 2]])
    dims, thetas = sample_uniform_cuts(bb, rng, 100_000)
    assert abs(np.mean(dims == 1) - 2 / 3) < sigma_band(2 / 3, 100_000)
    assert np.all((thetas >= bb.lo[dims]) & (thetas <= bb.hi[dims]))


def test_uniform_cut_needs_positive_length(rng):
    with pytest.raises(InputError):
        sample_uniform_cut(bounding_box([[1.0, 2.0]]), rng)


def test_uniform_separation_law(rng):
    C = rng.normal(size=(5, 3))
    n = 100_000
    dims, thetas = sample_uniform_cuts(bounding_box(C), rng, n)
    L = bounding_box(C).total_length
    for g in range(5):
        for h in range(g + 1, 5):
            q = np.abs(C[g] - C[h]).sum() / L
            assert abs(separation_freq(dims, thetas, C, g, h) - q) <= sigma_band(q, n)


@pytest.mark.parametrize("a,b,p,u,want", [
    (0.0, 4.0, 1.0, 0.25, 1.0),
    (0.0, 1.0, 2.0, 0.125, 0.25),
    (2.0, 6.0, 3.0, 0.5, 4.0),
    (-1.0, 1.0, 1.7, 0.5, 0.0),
    (0.0, 1.0, 2.0, 0.875, 0.75),
])
def test_theta_inverse_cdf_examples(a, b, p, u, want):
    assert theta_inverse_cdf(a, b, p, u) == pytest.approx(want, abs=1e-15)


def test_theta_inverse_cdf_rejects_bad_interval():
    with pytest.raises(InputError):
        theta_inverse_cdf(1.0, 1.0, 2.0, 0.3)


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 5.0])
def test_theta_inverse_cdf_monotone_in_range_and_inverts(p):
    u = np.linspace(0, 1, 2001)
    t = theta_inverse_cdf(-2.0, 5.0, p, u)
    assert np.all((t >= -2.0) & (t <= 5.0))
    assert np.all(np.diff(t) >= 0)
    assert np.allclose(theta_cdf(t, -2.0, 5.0, p), u, atol=1e-12)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_theta_pdf_integrates_to_cdf(p):
    from scipy import integrate
    for x in (0.1, 0.5, 0.9):
        val, _ = integrate.quad(lambda t: theta_pdf(t, 0.0, 1.0, p), 0.0, x, points=[0.5] if x > 0.5 else None)
        assert val == pytest.approx(float(theta_cdf(x, 0.0, 1.0, p)), rel=1e-9)


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_theta_ks(p):
    rng = rng_stream(2024, int(p))
    t = theta_inverse_cdf(0.0, 1.0, p, rng.random(100_000))
    res = stats.kstest(t, lambda x: theta_cdf(x, 0.0, 1.0, p))
    assert res.statistic < 0.006


def test_dp_p1_is_uniform_over_box(rng):
    C = rng.normal(size=(6, 2))
    n = 100_000
    d1, t1 = sample_dp_cuts(all_intervals(C, 1), rng, n)
    bb = bounding_box(C)
    off = np.concatenate([[0], np.cumsum(bb.lengths)])
    pos = off[d1] + t1 - bb.lo[d1]
    res = stats.kstest(pos, stats.uniform(0, bb.total_length).cdf)
    assert res.statistic < 0.006


def test_dp_mass_near_far_center(rng):
    C = np.array([[-1.0], [100.0]])
    n = 100_000
    _, t = sample_dp_cuts(all_intervals(C, 2), rng, n)
    q = 2 / 101 ** 2
    assert abs(np.mean((t > -1) & (t < 0)) - q) <= sigma_band(q, n)


def test_dp_two_centers_always_separated(rng):
    C = np.array([[0.0, 1.0], [2.0, -1.0]])
    dims, thetas = sample_dp_cuts(all_intervals(C, 2), rng, 20_000)
    assert separation_freq(dims, thetas, C, 0, 1) == 1.0


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_dp_separation_law(p):
    rng = rng_stream(99, int(p))
    C = rng.normal(size=(5, 2))
    I = all_intervals(C, p)
    n = 100_000
    dims, thetas = sample_dp_cuts(I, rng, n)
    for g in range(5):
        for h in range(g + 1, 5):
            q = pseudo_distance(C[g], C[h], C, p) / I.total_weight
            assert abs(separation_freq(dims, thetas, C, g, h) - q) <= sigma_band(q, n)


def test_dp_zero_weight_rejected(rng):
    I = all_intervals([[0.0], [1.0]], 2)
    with pytest.raises(InputError):
        sample_dp_cuts(I, rng, 1, weights=np.zeros(1))


def test_cut_distribution_wrapper(rng):
    C = np.array([[0.0], [1.0], [3.0]])
    assert CutDistribution("uniform", bounding_box(C)).total_mass == 3
    assert CutDistribution("dp", all_intervals(C, 2), 2).total_mass == 5
    with pytest.raises(InputError):
        CutDistribution("gauss", bounding_box(C))
    assert isinstance(sample_dp_cut(all_intervals(C, 2), rng), ThresholdCut)


def test_min_separated_pair_examples():
    C = np.array([[0.0], [1.0]])
    assert min_separated_pair(ThresholdCut(0, 0.5), [[0, 1]], C) == 1.0
    assert min_separated_pair(ThresholdCut(0, 5.0), [[0, 1]], C) is None
    C3 = np.array([[0.0], [0.1], [5.0]])
    assert min_separated_pair(ThresholdCut(0, 0.05), [[0, 1, 2]], C3) == pytest.approx(0.1)
    # only pairs that share a leaf count
    assert min_separated_pair(ThresholdCut(0, 0.05), [[0], [1, 2]], C3) is None


def test_min_separated_pair_pseudo_metric():
    C = np.array([[0.0], [1.0], [3.0]])
    assert min_separated_pair(ThresholdCut(0, 2.0), [[0, 1, 2]], C, "pseudo_p", 2.0) == 4.0
    assert min_separated_pair(ThresholdCut(0, 0.5), [[0, 1, 2]], C, "pseudo_p", 2.0) == 1.0
