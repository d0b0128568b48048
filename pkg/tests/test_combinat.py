import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fermishadow.combinat import (
    binom,
    canonical_permutation,
    falling,
    overlap_count,
    permutation_matrix,
    rank_subset,
    subsets,
    unrank_subset,
    validate_subset,
)


def test_binom_matches_math_comb():
    for n in range(12):
        for k in range(n + 1):
            assert binom(n, k) == math.comb(n, k)


def test_binom_zero_outside_triangle():
    assert binom(3, 5) == 0
    assert binom(3, -1) == 0
    assert binom(-2, 0) == 0
    assert binom(-2, 1) == 0


def test_falling():
    assert falling(5, 0) == 1
    assert falling(5, 2) == 20
    assert falling(2, 3) == 0
    assert falling(-1, 2) == 2


def test_subsets_colex_order_and_count():
    got = list(subsets(4, 2))
    assert got == [(1, 2), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)]
    for n in range(7):
        for k in range(n + 1):
            ss = list(subsets(n, k))
            assert len(ss) == binom(n, k)
            assert ss == sorted(ss, key=lambda z: tuple(reversed(z)))


def test_rank_matches_enumeration_order():
    for n in range(1, 8):
        for k in range(n + 1):
            for r, z in enumerate(subsets(n, k)):
                assert rank_subset(z, n) == r
                assert unrank_subset(r, n, k) == z


def test_rank_is_embedding_stable():
    assert rank_subset((1, 3), 4) == rank_subset((1, 3), 9)
    assert rank_subset((3, 4)) == 5
    assert rank_subset(()) == 0


def test_validate_subset_rejects():
    with pytest.raises(AssertionError):
        validate_subset((2, 1), 4)
    with pytest.raises(AssertionError):
        validate_subset((0, 1), 4)
    with pytest.raises(AssertionError):
        validate_subset((1, 5), 4)
    with pytest.raises(AssertionError):
        validate_subset((2, 2), 4)


def test_overlap_count():
    assert overlap_count((1, 2, 5), (2, 5, 6)) == 2
    assert overlap_count((), (1,)) == 0


def test_canonical_permutation_relabels_subset_to_front():
    for n in range(1, 7):
        for k in range(n + 1):
            for z in subsets(n, k):
                image = canonical_permutation(z, n)
                assert sorted(image) == list(range(1, n + 1))
                assert tuple(image[: len(z)]) == z
                rest = tuple(image[len(z):])
                assert rest == tuple(sorted(rest))


def test_permutation_matrix_action():
    n = 5
    z = (2, 4)
    v = permutation_matrix(canonical_permutation(z, n))
    e = np.zeros(n)
    e[0] = 1.0
    assert np.argmax(v @ e) == z[0] - 1
    assert np.allclose(v @ v.T, np.eye(n))


@given(st.integers(1, 10), st.data())
def test_rank_unrank_roundtrip(n, data):
    k = data.draw(st.integers(0, n))
    z = tuple(sorted(data.draw(
        st.sets(st.integers(1, n), min_size=k, max_size=k))))
    assert unrank_subset(rank_subset(z, n), n, k) == z
