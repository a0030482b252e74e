import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from xcluster.core import InputError, lp_pow_distance
from xcluster.geometry import (all_intervals, bounding_box, interval_decomposition, pairwise_pseudo_distances,
                               pseudo_distance, warped_coordinates)
from xcluster.instances import gen_lower_bound


def test_bounding_box_examples():
    bb = bounding_box([[0, 0], [1, 2]])
    assert bb.lo.tolist() == [0, 0] and bb.hi.tolist() == [1, 2] and bb.total_length == 3
    assert bounding_box([[4.0, 5.0]]).total_length == 0
    lb = bounding_box(gen_lower_bound(3).centers)
    assert np.all(lb.lo == 0) and np.all(lb.hi == 2) and lb.total_length == 12


def test_interval_decomposition_examples():
    C = np.array([[0.0], [1.0], [3.0]])
    assert interval_decomposition(0, 0, 3, C).intervals == ((0, 1), (1, 3))
    assert interval_decomposition(0, 2, 2, C).intervals == ()
    # two interior projections, endpoints not at centers
    C2 = np.array([[0.0, 0], [4.0, 0], [1.0, 0], [2.5, 0]])
    assert interval_decomposition(0, 0.5, 3.0, C2).intervals == ((0.5, 1.0), (1.0, 2.5), (2.5, 3.0))
    # coincident projections merge
    C3 = np.array([[1.0], [1.0], [2.0]])
    assert interval_decomposition(0, 0, 3, C3).intervals == ((0, 1), (1, 2), (2, 3))


def test_pseudo_distance_examples():
    C = np.array([[0.0], [1.0], [3.0]])
    assert pseudo_distance([0], [3], C, 2) == 5.0
    assert pseudo_distance([1.5], [1.5], C, 2) == 0.0


def test_all_intervals_examples():
    I = all_intervals([[0.0], [1.0], [3.0]], 2)
    assert I.a.tolist() == [0, 1] and I.b.tolist() == [1, 3] and I.weights.tolist() == [1, 4]
    assert I.total_weight == 5
    C = np.array([[0.0, 1.0, 5.0], [2.0, 1.0, 4.0]])
    I2 = all_intervals(C, 3)
    assert len(I2) == 2 and I2.total_weight == pytest.approx(pseudo_distance(C[0], C[1], C, 3))
    with pytest.raises(InputError):
        all_intervals([[1.0, 1.0], [1.0, 1.0]], 2)


def test_l1_total_equals_box_length(rng):
    C = rng.normal(size=(9, 4))
    assert all_intervals(C, 1).total_weight == pytest.approx(bounding_box(C).total_length)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_domination_and_contiguity(seed, p):
    from xcluster.samplers import rng_stream
    rng = rng_stream(seed)
    C = rng.normal(size=(6, 3))
    x, y = rng.normal(size=(2, 3)) * 2
    for i in range(3):
        dec = interval_decomposition(i, x[i], y[i], C)
        ends = [b for _, b in dec.intervals[:-1]]
        starts = [a for a, _ in dec.intervals[1:]]
        assert ends == starts
        assert dec.length == pytest.approx(abs(x[i] - y[i]), rel=1e-12, abs=1e-12)
    dp = pseudo_distance(x, y, C, p)
    assert dp <= lp_pow_distance(x, y, p) * (1 + 1e-12)
    if p == 1.0:
        assert dp == pytest.approx(lp_pow_distance(x, y, 1))


@pytest.mark.parametrize("p", [1.0, 2.0, 3.0])
def test_separation_weight_equals_pseudo_distance(rng, p):
    C = rng.normal(size=(6, 3))
    I = all_intervals(C, p)
    for g in range(6):
        for h in range(g + 1, 6):
            lo = np.minimum(C[g], C[h])[I.dims]
            hi = np.maximum(C[g], C[h])[I.dims]
            between = (I.a >= lo) & (I.b <= hi)
            assert I.weights[between].sum() == pytest.approx(pseudo_distance(C[g], C[h], C, p), rel=1e-12)


def test_warped_coordinates_match_pseudo_distance(rng):
    C = rng.normal(size=(7, 3))
    C[3, 1] = C[5, 1]
    for p in (1.0, 2.5):
        D = pairwise_pseudo_distances(C, p)
        for g in range(7):
            for h in range(7):
                assert D[g, h] == pytest.approx(pseudo_distance(C[g], C[h], C, p), rel=1e-12, abs=1e-15)
    assert np.allclose(warped_coordinates(C, 1.0), C - C.min(axis=0))
