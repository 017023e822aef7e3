import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbir import Metric, l1_distance, l2sq_distance, row_distances


def fsum_l1(a, b):
    return math.fsum(abs(float(x) - float(y)) for x, y in zip(a, b))


def fsum_l2sq(a, b):
    return math.fsum((float(x) - float(y)) ** 2 for x, y in zip(a, b))


vector_pairs = st.integers(min_value=1, max_value=40).flatmap(
    lambda d: st.tuples(
        st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=32),
                 min_size=d, max_size=d),
        st.lists(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False, width=32),
                 min_size=d, max_size=d),
    )
)


def test_l1_identity():
    assert l1_distance([1, 2, 3], [1, 2, 3]) == 0.0


def test_l1_unit_example():
    assert l1_distance([1, 0], [0, 1]) == 2.0


def test_l1_summation_oracle():
    a, b = [3, -1, 2], [1, 1, 1]
    assert l1_distance(a, b) == fsum_l1(a, b) == 5.0


def test_l2sq_identity():
    assert l2sq_distance([4.5, -2.0], [4.5, -2.0]) == 0.0


def test_l2sq_345_example():
    a, b = [0, 0], [3, 4]
    assert l2sq_distance(a, b) == fsum_l2sq(a, b) == 25.0


def test_l2sq_diagonal_example():
    a, b = [1, 1], [2, 2]
    assert l2sq_distance(a, b) == fsum_l2sq(a, b) == 2.0


@pytest.mark.parametrize("fn", [l1_distance, l2sq_distance])
def test_dimension_mismatch(fn):
    with pytest.raises(ValueError, match="dimension mismatch"):
        fn([1, 2, 3], [1, 2])


def test_row_distances_shape_checks():
    with pytest.raises(ValueError):
        row_distances(np.zeros(3), np.zeros(3), Metric.L1)
    with pytest.raises(ValueError):
        row_distances(np.zeros((2, 3)), np.zeros((1, 3)), Metric.L1)


def test_row_distances_empty():
    out = row_distances(np.zeros((0, 4), np.float32), np.zeros(4), Metric.L2SQ)
    assert out.shape == (0,)


def test_float64_accumulation():
    # 1e5 summands of 0.01: a float32 accumulator drifts visibly, float64 does not
    a = np.full(100_000, 0.1, dtype=np.float32)
    b = np.zeros(100_000, dtype=np.float32)
    expected = float(np.float32(0.1)) ** 2 * 100_000
    assert l2sq_distance(a, b) == pytest.approx(expected, rel=1e-12)


@given(vector_pairs)
def test_elementwise_oracle(pair):
    a, b = pair
    assert l1_distance(a, b) == pytest.approx(fsum_l1(a, b), rel=1e-12, abs=1e-12)
    assert l2sq_distance(a, b) == pytest.approx(fsum_l2sq(a, b), rel=1e-12, abs=1e-12)


@given(vector_pairs)
def test_symmetry_and_nonnegativity(pair):
    a, b = pair
    for fn in (l1_distance, l2sq_distance):
        d_ab, d_ba = fn(a, b), fn(b, a)
        assert d_ab >= 0.0
        assert d_ab == d_ba


@given(vector_pairs)
def test_identity_of_indiscernibles(pair):
    a, b = pair
    for fn in (l1_distance, l2sq_distance):
        assert fn(a, a) == 0.0
        if a != b:
            assert fn(a, b) > 0.0


@settings(max_examples=50)
@given(
    st.integers(min_value=1, max_value=20).flatmap(
        lambda d: st.lists(
            st.lists(st.floats(min_value=-1e3, max_value=1e3, allow_nan=False, width=32),
                     min_size=d, max_size=d),
            min_size=3, max_size=3,
        )
    )
)
def test_l1_triangle_inequality(triple):
    a, b, c = triple
    lhs = l1_distance(a, c)
    rhs = l1_distance(a, b) + l1_distance(b, c)
    assert lhs <= rhs * (1 + 1e-12) + 1e-9


@settings(max_examples=50)
@given(st.integers(min_value=0, max_value=10_000))
def test_l2sq_ranks_like_euclidean(seed):
    # squared distances are a monotone transform of true Euclidean distances,
    # so (distance, id)-sorted orders agree, ties included
    rng = np.random.default_rng(seed)
    n, d = rng.integers(2, 30), rng.integers(1, 16)
    base = rng.integers(-3, 4, size=(n, d)).astype(np.float32)  # integer grid forces ties
    q = rng.integers(-3, 4, size=d).astype(np.float32)
    sq = row_distances(base, q, Metric.L2SQ)
    euclid = [math.sqrt(fsum_l2sq(row, q)) for row in base]
    order_sq = sorted(range(n), key=lambda i: (sq[i], i))
    order_eu = sorted(range(n), key=lambda i: (euclid[i], i))
    assert order_sq == order_eu
