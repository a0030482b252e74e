import math

import numpy as np
import pytest
from scipy import stats

from xcluster.core import InputError, cost_of_tree, cost_to_centers
from xcluster.oracle import (DEFAULT_ALPHA, brute_force_opt_tree, delta_p, delta_p_pow, exact_fraction,
                             expected_one_cut_cost, statistical_suite, theta_cdf_law)
from xcluster.samplers import rng_stream, theta_inverse_cdf


def test_single_center():
    X = np.array([[0.0], [2.0], [7.0]])
    r = brute_force_opt_tree(X, [[1.0]], 1)
    assert r.cost_reference == 1 + 1 + 6
    assert r.cost == 7  # median 2
    assert r.tree.k == 1


def test_two_clusters_example():
    X = np.array([[0.0], [1.0], [9.0], [10.0]])
    C = np.array([[0.5], [9.5]])
    r = brute_force_opt_tree(X, C, 1)
    assert r.cost == 2.0
    assert r.tree.root.theta == 5.0
    assert cost_of_tree(X, r.tree, C, 1, leaf_center_mode="optimal").cost == 2.0
    assert cost_of_tree(X, r.tree_reference, C, 1).cost == r.cost_reference


def test_oracle_at_least_unconstrained():
    rng = rng_stream(4)
    for _ in range(10):
        X = rng.normal(size=(12, 2))
        C = rng.normal(size=(3, 2))
        r = brute_force_opt_tree(X, C, 2)
        assert r.cost_reference >= cost_to_centers(X, C, 2) - 1e-12
        r.tree.validate(C)
        assert r.explored > 0


def test_oracle_guard():
    with pytest.raises(InputError, match="k <= 4"):
        brute_force_opt_tree(np.zeros((3, 1)), np.arange(5.0)[:, None], 1)
    with pytest.raises(InputError):
        brute_force_opt_tree(np.zeros((15, 1)), [[0.0], [1.0]], 1)


def test_delta_values():
    assert delta_p(3, 1) == 8
    assert delta_p(3, 2) == pytest.approx(math.sqrt(12), rel=1e-15)
    assert delta_p_pow(3, 2) == 12
    assert delta_p(5, 1.5) == pytest.approx((2 * sum((5 - i) * i ** 1.5 for i in range(1, 5))) ** (1 / 1.5))


@pytest.mark.parametrize("D", [2.0, 10.0, 100.0])
def test_one_cut_uniform_closed_form(D):
    assert expected_one_cut_cost([-1, D], [0], 2, "uniform") == pytest.approx(D, rel=1e-6)


@pytest.mark.parametrize("D", [2.0, 10.0, 100.0])
def test_one_cut_dp_closed_form(D):
    want = 2 * D ** 2 / (D + 1) ** 2 + 1 - 2 / (D + 1) ** 2
    got = expected_one_cut_cost([-1, D], [0], 2, "dp")
    assert got == pytest.approx(want, rel=1e-6) and got <= 3


def test_one_cut_symmetric_example():
    assert expected_one_cut_cost([-1, 1], [0], 1, "uniform") == pytest.approx(1.0, rel=1e-9)


def test_suite_calibration():
    law = theta_cdf_law(0.0, 1.0, 2.0)
    passes = 0
    for s in range(100):
        u = rng_stream(s).random(10_000)
        passes += statistical_suite(theta_inverse_cdf(0.0, 1.0, 2.0, u), law).passed
    assert passes >= 99


def test_suite_rejects_wrong_law():
    v = statistical_suite(rng_stream(1).random(10_000), theta_cdf_law(0.0, 1.0, 2.0))
    assert not v.passed and v.test == "ks"


def test_suite_discrete_and_binomial():
    rng = rng_stream(2)
    probs = np.array([0.2, 0.3, 0.5])
    assert statistical_suite(rng.choice(3, 20_000, p=probs), probs).passed
    assert not statistical_suite(rng.choice(3, 20_000, p=[0.3, 0.3, 0.4]), probs).passed
    assert statistical_suite(rng.random(20_000) < 0.1, 0.1).passed
    assert not statistical_suite(rng.random(20_000) < 0.12, 0.1).passed


def test_suite_refuses_small_samples():
    with pytest.raises(InputError):
        statistical_suite(np.zeros(100), 0.5)


def test_exact_fraction():
    from fractions import Fraction
    assert exact_fraction(1 / 81) == Fraction(1, 81)
    assert DEFAULT_ALPHA == 0.0027
