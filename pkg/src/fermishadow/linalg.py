"""Dense linear algebra kernels: Haar sampling, minors, compounds, Pfaffians.

Contents
--------
    haar_unitary    : one Haar-distributed unitary from a numpy Generator
    minor_det       : determinant of a row/column submatrix
    minors_batch    : dets of many submatrices of a stack of matrices
    compound_matrix : k-th multiplicative compound (action on k-subsets)
    pfaffian        : Pfaffian of an even skew-symmetric matrix
    eigenvalues     : eigenvalues of a small dense matrix
"""

import numpy as np

from .combinat import binom, subsets


# ---------------------------------------------------------------- Haar

def unitary_from_ginibre(g: np.ndarray) -> np.ndarray:
    """Map a stack (..., n, n) of complex Ginibre matrices to Haar unitaries.

    QR with the column-phase gauge fixed so that R has positive real
    diagonal; without the fix the QR gauge biases the distribution.
    """
    q, r = np.linalg.qr(g)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mod = np.abs(d)
    phase = np.where(mod > 0, d / np.where(mod > 0, mod, 1.0), 1.0)
    return q * phase[..., None, :]


def ginibre(n: int, rng: np.random.Generator) -> np.ndarray:
    """n x n complex standard Ginibre matrix; one RNG call, fixed draw order."""
    g = rng.standard_normal((n, 2 * n))
    return (g[:, :n] + 1j * g[:, n:]) / np.sqrt(2.0)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed n x n unitary.

    Redraws once if the Ginibre sample is numerically singular (measure
    zero; the retry keeps the draw count deterministic in practice).
    """
    g = ginibre(n, rng)
    if np.linalg.matrix_rank(g) < n:
        g = ginibre(n, rng)
    return unitary_from_ginibre(g)


# ---------------------------------------------------------------- minors

def minor_det(u: np.ndarray, rows, cols) -> complex:
    """det of the submatrix of u on the given 1-based rows and columns."""
    ridx = np.asarray(rows, dtype=np.int64) - 1
    cidx = np.asarray(cols, dtype=np.int64) - 1
    assert ridx.shape == cidx.shape
    if ridx.size == 0:
        return 1.0 + 0.0j
    return complex(np.linalg.det(u[np.ix_(ridx, cidx)]))


def _det_stack(a: np.ndarray) -> np.ndarray:
    """Determinants over the last two axes, cheap closed forms for k <= 3."""
    k = a.shape[-1]
    if k == 0:
        return np.ones(a.shape[:-2], dtype=a.dtype)
    if k == 1:
        return a[..., 0, 0]
    if k == 2:
        return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
    if k == 3:
        return (
            a[..., 0, 0] * (a[..., 1, 1] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 1])
            - a[..., 0, 1] * (a[..., 1, 0] * a[..., 2, 2] - a[..., 1, 2] * a[..., 2, 0])
            + a[..., 0, 2] * (a[..., 1, 0] * a[..., 2, 1] - a[..., 1, 1] * a[..., 2, 0])
        )
    return np.linalg.det(a)


def minors_batch(x: np.ndarray, row_idx: np.ndarray, col_idx: np.ndarray) -> np.ndarray:
    """Minors of a stack of matrices.

    Parameters
    ----------
    x       : (N, n, m) stack
    row_idx : (R, k) 0-based row subsets
    col_idx : (C, k) 0-based column subsets

    Returns
    -------
    (N, R, C) array with entry [i, a, b] = det x[i][row_idx[a]][:, col_idx[b]].
    """
    x = np.asarray(x)
    row_idx = np.asarray(row_idx, dtype=np.int64)
    col_idx = np.asarray(col_idx, dtype=np.int64)
    n_stack = x.shape[0]
    nr, k = row_idx.shape
    nc = col_idx.shape[0]
    out = np.empty((n_stack, nr, nc), dtype=np.complex128)
    if k == 0:
        out[:] = 1.0
        return out
    for a in range(nr):
        rows = x[:, row_idx[a], :]                      # (N, k, m)
        sub = rows[:, :, col_idx]                       # (N, k, C, k)
        sub = np.ascontiguousarray(sub.transpose(0, 2, 1, 3))
        out[:, a, :] = _det_stack(sub)
    return out


def subset_index_array(n: int, k: int) -> np.ndarray:
    """(C(n,k), k) array of 0-based mode indices, colex row order."""
    if k == 0:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(subsets(n, k)), dtype=np.int64) - 1


def compound_matrix(u: np.ndarray, k: int) -> np.ndarray:
    """k-th compound of u: entry [r, c] = det of u on subsets r (rows), c (cols).

    Rows and columns are indexed by colex rank.  The compound of a product is
    the product of compounds, so this is the k-particle action of u.
    """
    n = u.shape[0]
    idx = subset_index_array(n, k)
    return minors_batch(u[None, :, :].astype(np.complex128), idx, idx)[0]


def compound_batch(u: np.ndarray, k: int) -> np.ndarray:
    """k-th compounds of a stack (N, n, n) -> (N, C(n,k), C(n,k))."""
    n = u.shape[-1]
    idx = subset_index_array(n, k)
    return minors_batch(np.asarray(u, dtype=np.complex128), idx, idx)


# ---------------------------------------------------------------- pfaffian

def pfaffian(a: np.ndarray) -> complex:
    """Pfaffian of an even-dimensional skew-symmetric matrix.

    Parlett-Reid tridiagonalization with partial pivoting; O(m^3).  The input
    is copied.  Returns 0 for odd dimension only if asserts are disabled; odd
    input is rejected.
    """
    a = np.array(a, dtype=np.complex128)
    m = a.shape[0]
    assert a.shape == (m, m), "square matrix required"
    assert m % 2 == 0, "Pfaffian needs even dimension"
    assert np.allclose(a, -a.T, atol=1e-10 * max(1.0, np.abs(a).max(initial=0.0))), \
        "matrix is not skew-symmetric"
    if m == 0:
        return 1.0 + 0.0j
    val = 1.0 + 0.0j
    for j in range(0, m - 1, 2):
        # pivot the largest entry of column j below the diagonal into row j+1
        p = j + 1 + int(np.argmax(np.abs(a[j + 1:, j])))
        if p != j + 1:
            a[[j + 1, p], :] = a[[p, j + 1], :]
            a[:, [j + 1, p]] = a[:, [p, j + 1]]
            val = -val
        piv = a[j, j + 1]
        if piv == 0:
            return 0.0 + 0.0j
        val *= piv
        if j + 2 < m:
            tau = a[j, j + 2:] / piv
            col = a[j + 2:, j + 1]
            a[j + 2:, j + 2:] += np.outer(tau, col) - np.outer(col, tau)
    return complex(val)


# ---------------------------------------------------------------- eigen

def eigenvalues(m: np.ndarray) -> np.ndarray:
    """Eigenvalues of a dense square matrix (LAPACK nonsymmetric solver)."""
    return np.linalg.eigvals(np.asarray(m))
