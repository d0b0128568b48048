"""Exact combinatorics for occupation subsets.

Occupation vectors are sorted tuples of 1-based mode indices.  The d-subsets
of [n] are enumerated in colexicographic order, so the rank of a subset does
not depend on n and basis vectors embed consistently across mode counts.

Contents
--------
    binom                  : binomial coefficient, 0 outside the triangle
    rank_subset            : colex rank of a subset
    unrank_subset          : inverse of rank_subset
    subsets                : iterate all d-subsets of [n] in colex order
    overlap_count          : |p cap q|
    canonical_permutation  : permutation sending [d] onto a subset
    Rational               : exact scalar type used across the package
"""

from fractions import Fraction
from math import comb

import numpy as np

Rational = Fraction


def binom(a: int, b: int) -> int:
    """C(a, b) with the convention that out-of-range arguments give 0."""
    if b < 0 or a < 0 or b > a:
        return 0
    return comb(a, b)


def falling(a: int, b: int) -> int:
    """Falling factorial a (a-1) ... (a-b+1), with falling(a, 0) = 1."""
    assert b >= 0
    out = 1
    for i in range(b):
        out *= a - i
    return out


def validate_subset(z, n: int) -> tuple:
    """Check that z is a strictly increasing tuple of modes in 1..n."""
    z = tuple(int(m) for m in z)
    assert all(1 <= m <= n for m in z), f"modes out of range 1..{n}: {z}"
    assert all(z[i] < z[i + 1] for i in range(len(z) - 1)), f"not increasing: {z}"
    return z


def rank_subset(z, n: int = None) -> int:
    """Colex rank of the subset z among the |z|-subsets, independent of n.

    rank(z) = sum_j C(z_j - 1, j) over positions j = 1..|z|.  The empty
    subset has rank 0.  n is only used for validation when given.
    """
    z = validate_subset(z, n if n is not None else (max(z) if z else 1))
    return sum(binom(m - 1, j + 1) for j, m in enumerate(z))


def unrank_subset(r: int, n: int, d: int) -> tuple:
    """Subset of [n] with |z| = d and colex rank r."""
    assert 0 <= r < binom(n, d), f"rank {r} out of range for C({n},{d})"
    out = []
    for j in range(d, 0, -1):
        # largest m with C(m, j) <= r, found 0-based then shifted
        m = j - 1
        while binom(m + 1, j) <= r:
            m += 1
        out.append(m + 1)
        r -= binom(m, j)
    return tuple(reversed(out))


def subsets(n: int, d: int):
    """All d-subsets of [n] as tuples, in colex order."""
    if d == 0:
        yield ()
        return
    for z in _colex(n, d):
        yield z


def _colex(n: int, d: int):
    if d == 0:
        yield ()
        return
    for top in range(d, n + 1):
        for rest in _colex(top - 1, d - 1):
            yield rest + (top,)


def overlap_count(p, q) -> int:
    """Number of modes shared by subsets p and q."""
    return len(set(p) & set(q))


def canonical_permutation(z, n: int) -> np.ndarray:
    """Permutation image v with v(j) = z_j for j <= |z|, rest of [n] ascending.

    Returned as a 1-based int array of length n; v is the mode relabeling
    whose matrix has columns e_{v(j)}.
    """
    z = validate_subset(z, n)
    rest = [m for m in range(1, n + 1) if m not in set(z)]
    return np.array(list(z) + rest, dtype=np.int64)


def permutation_matrix(image) -> np.ndarray:
    """n x n matrix P with P[image[j]-1, j] = 1."""
    image = np.asarray(image, dtype=np.int64)
    n = image.shape[0]
    p = np.zeros((n, n))
    p[image - 1, np.arange(n)] = 1.0
    return p
