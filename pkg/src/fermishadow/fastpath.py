"""Fast transition estimates via Pfaffian derivatives, avoiding compounds.

A single-shadow estimate of a diagonal k-body pattern is a degree-k
polynomial functional of a Pfaffian generating function.  With u_eff the
effective rotation (readout relabeled to the first eta modes), the kernel

    A(kappa) = kappa u~^T J u~ + Lambda x Yhat

is real skew-symmetric, where u~ is the orthogonal image of u_eff on
mode-doubled space, J puts a Yhat block on the first eta pairs, Lambda =
2 I_[k] - I_n, and Yhat = [[0, 1], [-1, 0]].  Then (-1)^(n-k) Pf[A(kappa)]
generates the needed occupation-polynomial expectations; A(0) never depends
on u_eff and Pf[A(0)] = (-1)^(n-k) exactly.  Derivatives at 0 come from a
trace recursion whose inputs are eigenvalue power sums of a 2k x 2k Gram
block, so one estimate costs O(k^2 eta) after O(k eta) column gathers.

Off-diagonal transitions (p, q) reduce exactly to diagonal estimates in
rotated frames: pair rotations at k'+1 discrete angles (k' = modes where p
and q differ) combined by a DFT, times a 2^k' inclusion-exclusion over
pattern choices, times a global fermionic reordering sign.

Contents
--------
    majorana_rotation       : orthogonal doubled images of a unitary
    assemble_a_matrix       : the Pfaffian kernel A(kappa)
    generating_function_value
    f_ks, alpha_coeffs      : expansion weights of the estimation operator
    build_m, trace_powers, inverse_trace_sequence
    pfaffian_derivatives    : d^x Pf[A]|_0 for x = 0..x_max
    decompose_rdm           : exact off-diagonal-to-diagonal decomposition
    fast_estimate_rdm       : full fast estimator, equal to the dense one
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

import numpy as np

from .combinat import binom, validate_subset
from .shadows import ClassicalShadow, estimation_entry

Y = np.array([[0.0, -1.0], [1.0, 0.0]])
YHAT = np.array([[0.0, 1.0], [-1.0, 0.0]])


# ------------------------------------------------- doubled-space images

def majorana_rotation(u: np.ndarray):
    """Orthogonal images (u_tilde, iu_tilde) of a unitary on doubled space.

    u_tilde represents the rotation itself; iu_tilde represents i times it.
    Both are real; u_tilde is special orthogonal.
    """
    re, im = u.real, u.imag
    i2 = np.eye(2)
    u_tilde = np.kron(re, i2) + np.kron(im, Y)
    iu_tilde = np.kron(-im, i2) + np.kron(re, Y)
    return u_tilde, iu_tilde


def assemble_a_matrix(u_eff: np.ndarray, eta: int, k: int, kappa: float) -> np.ndarray:
    """Pfaffian kernel A(kappa) for the effective rotation u_eff."""
    n = u_eff.shape[0]
    assert 0 <= k <= eta <= n
    u_tilde, _ = majorana_rotation(u_eff)
    j = np.zeros((2 * n, 2 * n))
    for m in range(eta):
        j[2 * m : 2 * m + 2, 2 * m : 2 * m + 2] = YHAT
    lam = np.zeros((2 * n, 2 * n))
    for m in range(n):
        lam[2 * m : 2 * m + 2, 2 * m : 2 * m + 2] = YHAT if m < k else -YHAT
    return kappa * (u_tilde.T @ j @ u_tilde) + lam


def generating_function_value(u_eff: np.ndarray, eta: int, k: int, kappa: float) -> float:
    """(-1)^(n-k) Pf[A(kappa)]; equals the dense occupation generating sum."""
    from .linalg import pfaffian

    n = u_eff.shape[0]
    return float(
        ((-1) ** (n - k)) * pfaffian(assemble_a_matrix(u_eff, eta, k, kappa)).real
    )


# ------------------------------------------------- expansion weights

def f_ks(eta: int, k: int, s: int, j: int) -> Fraction:
    """Weight of the j-th elementary pair-product in the overlap-s projector.

    f(j) = sum_{x=j}^{k} (-1)^x C(x,s) 2^(-x) C(eta-j, x-j); zero for j > k.
    """
    assert 0 <= s <= k <= eta and j >= 0
    total = Fraction(0)
    for x in range(j, k + 1):
        total += Fraction((-1) ** x * comb(x, s) * binom(eta - j, x - j), 2**x)
    return total


@dataclass
class FastCoefficients:
    """Precomputed weights turning Pfaffian derivatives into one estimate."""

    n: int
    eta: int
    k: int
    e_prime: tuple          # estimation entries per overlap class s
    alpha: tuple            # complex weights of the pair-product expectations
    derivative_weights: tuple  # real c_x with estimate = sum_x c_x d^x Pf / x!


@lru_cache(maxsize=None)
def alpha_coeffs(n: int, eta: int, k: int) -> FastCoefficients:
    e_prime = tuple(estimation_entry(n, eta, k, s) for s in range(k + 1))
    cs = []
    for x in range(k + 1):
        cs.append(sum((-1) ** s * f_ks(eta, k, s, x) * e_prime[s] for s in range(k + 1)))
    alpha = tuple((1j ** x) * complex(c) for x, c in enumerate(cs))
    return FastCoefficients(n, eta, k, e_prime, alpha, tuple(cs))


# ------------------------------------------------- trace recursion

def build_m(u_eff: np.ndarray, k: int, eta: int) -> np.ndarray:
    """2k x 2k real Gram block M driving the trace recursion."""
    return _m_from_block(u_eff[:eta, :k])


def _m_from_block(w_block: np.ndarray) -> np.ndarray:
    """M = m'^T m' where m' is the doubled image of the eta x k block of i u_eff."""
    eta, k = w_block.shape
    m = np.empty((2 * eta, 2 * k))
    re, im = w_block.real, w_block.imag
    m[0::2, 0::2] = -im
    m[0::2, 1::2] = -re
    m[1::2, 0::2] = re
    m[1::2, 1::2] = -im
    return m.T @ m


def trace_powers(m: np.ndarray, count: int) -> list:
    """[Tr m^y for y = 1..count] via eigenvalues."""
    from .linalg import eigenvalues

    lam = eigenvalues(m)
    out = []
    acc = np.ones_like(lam)
    for _ in range(count):
        acc = acc * lam
        out.append(complex(acc.sum()).real)
    return out


def inverse_trace_sequence(traces: list, j_max: int, eta: int, k: int = None) -> list:
    """[T_j for j = 1..j_max]: traces of powers of A(0)^-1 dA/dkappa.

    T_j = (-1)^j (2 eta + sum_{y=1}^{j} (-2)^y C(j,y) Tr[M^y]).  k names
    the block size the traces came from; only eta and the Tr[M^y] values
    enter the result.
    """
    assert len(traces) >= j_max
    out = []
    for j in range(1, j_max + 1):
        s = 2.0 * eta
        for y in range(1, j + 1):
            s += (-2.0) ** y * comb(j, y) * traces[y - 1]
        out.append(((-1) ** j) * s)
    return out


def _pf_derivative_recursion(pf0: float, t_list: list, x_max: int) -> list:
    """d^x Pf|_0 from d Pf/Pf = T_1/2 and T_1^(j) = (-1)^j j! T_{j+1}."""
    out = [pf0]
    for x in range(1, x_max + 1):
        acc = 0.0
        for j in range(x):
            acc += comb(x - 1, j) * ((-1) ** j) * factorial(j) * t_list[j] * out[x - 1 - j]
        out.append(acc / 2.0)
    return out


def pfaffian_derivatives(u_eff: np.ndarray, eta: int, k: int, x_max: int = None) -> list:
    """d^x Pf[A(kappa)]|_0 for x = 0..x_max (default eta), via the trace recursion.

    Pf at kappa = 0 is computed honestly from the assembled matrix; the
    sign shortcut it equals is checked against this routine in the tests.
    """
    from .linalg import pfaffian

    if x_max is None:
        x_max = eta
    pf0 = float(pfaffian(assemble_a_matrix(u_eff, eta, k, 0.0)).real)
    m = build_m(u_eff, k, eta)
    t_list = inverse_trace_sequence(trace_powers(m, x_max), x_max, eta, k)
    return _pf_derivative_recursion(pf0, t_list, x_max)


# ------------------------------------------------- off-diagonal reduction

@dataclass
class DecompositionTerm:
    """One rotated diagonal pattern with its complex weight.

    col_rows/col_vals give the first k columns of the composed mode map as
    at most two (1-based row, value) entries per column; rows of u at the
    readout modes against these columns build the estimate's eta x k block.
    """

    coeff: complex
    phi: float
    pattern: tuple
    col_rows: np.ndarray
    col_vals: np.ndarray


@dataclass
class RdmDecomposition:
    """Exact expansion of a transition operator over rotated diagonal ones."""

    n: int
    k: int
    p: tuple
    q: tuple
    shared: tuple           # z = p cap q
    p_only: tuple
    q_only: tuple
    sign: int
    terms: tuple

    def term_rotation_matrix(self, term: DecompositionTerm) -> np.ndarray:
        """Dense n x n unitary of one term (test and cross-check use)."""
        n, kp = self.n, len(self.p_only)
        # relabeling: j -> p'_j, k'+j -> q'_j, 2k'+j -> z_j, rest ascending
        head = list(self.p_only) + list(self.q_only) + list(self.shared)
        rest = [m for m in range(1, n + 1) if m not in set(head)]
        vpq = np.array(head + rest, dtype=np.int64)
        pm_vpq = np.zeros((n, n), dtype=np.complex128)
        pm_vpq[vpq - 1, np.arange(n)] = 1.0
        w = np.eye(n, dtype=np.complex128)
        half = np.exp(0.5j * term.phi) / np.sqrt(2.0)
        for j in range(kp):
            a, b = j, kp + j
            w[a, a] = half
            w[a, b] = half
            w[b, a] = half.conjugate()
            w[b, b] = -half.conjugate()
        head_x = list(term.pattern)
        rest_x = [m for m in range(1, n + 1) if m not in set(head_x)]
        vx = np.array(head_x + rest_x, dtype=np.int64)
        pm_vx = np.zeros((n, n), dtype=np.complex128)
        pm_vx[vx - 1, np.arange(n)] = 1.0
        return pm_vpq @ w @ pm_vx


def _mask(modes) -> int:
    m = 0
    for mode in modes:
        m |= 1 << (mode - 1)
    return m


def _apply_sign(mask: int, mode: int, create: bool):
    bit = 1 << (mode - 1)
    if create == bool(mask & bit):
        return None, 0
    sign = -1 if (mask & (bit - 1)).bit_count() & 1 else 1
    return (mask | bit) if create else (mask & ~bit), sign


def _reordering_sign(p, q, p_only, q_only, shared) -> int:
    """Parity relating the transition string to the paired product form.

    Both strings map the reference ket on q to the ket on p; the ratio of
    the two resulting signs is the global parity of the decomposition.
    """
    mask, sd = _mask(q), 1
    for mode in q:
        mask, s = _apply_sign(mask, mode, create=False)
        sd *= s
    for mode in reversed(p):
        mask, s = _apply_sign(mask, mode, create=True)
        sd *= s
    mask, sx = _mask(q), 1
    for pj, qj in reversed(list(zip(p_only, q_only))):
        mask, s = _apply_sign(mask, qj, create=False)
        sx *= s
        mask, s = _apply_sign(mask, pj, create=True)
        sx *= s
    return sd * sx


@lru_cache(maxsize=None)
def decompose_rdm(p: tuple, q: tuple, n: int) -> RdmDecomposition:
    """Expand the transition (p, q) over rotated diagonal patterns, exactly.

    With k' the number of modes where p and q differ, returns (k'+1) 2^k'
    terms: DFT angles phi_r = pi r/(k'+1) with weights e^(-i k' phi_r)/(k'+1)
    isolate the wanted pair monomial, and an inclusion-exclusion over the
    2^k' pattern choices expands the paired occupation differences.  The sum
    of coeff * (rotated diagonal estimate) times `sign` reproduces the
    transition estimate of any shadow exactly.
    """
    p = validate_subset(p, n)
    q = validate_subset(q, n)
    assert len(p) == len(q) >= 1
    k = len(p)
    shared = tuple(sorted(set(p) & set(q)))
    p_only = tuple(m for m in p if m not in shared)
    q_only = tuple(m for m in q if m not in shared)
    kp = len(p_only)
    mshared = len(shared)
    sign = _reordering_sign(p, q, p_only, q_only, shared)
    terms = []
    for r in range(kp + 1):
        phi = np.pi * r / (kp + 1)
        cr = np.exp(-1j * kp * phi) / (kp + 1)
        for sel in range(2**kp):
            chosen = [j for j in range(kp) if (sel >> j) & 1]
            parity = (-1) ** len(chosen)
            pattern = sorted(
                [j + 1 for j in range(kp) if j not in chosen]
                + [kp + j + 1 for j in chosen]
                + [2 * kp + i + 1 for i in range(mshared)]
            )
            col_rows = np.zeros((k, 2), dtype=np.int64)
            col_vals = np.zeros((k, 2), dtype=np.complex128)
            half = np.exp(0.5j * phi) / np.sqrt(2.0)
            for col, x in enumerate(pattern):
                if x <= 2 * kp:
                    jj = x - 1 if x <= kp else x - kp - 1
                    top = p_only[jj]
                    bot = q_only[jj]
                    col_rows[col] = (top, bot)
                    if x <= kp:
                        col_vals[col] = (half, half.conjugate())
                    else:
                        col_vals[col] = (half, -half.conjugate())
                else:
                    col_rows[col, 0] = shared[x - 2 * kp - 1]
                    col_vals[col, 0] = 1.0
            terms.append(
                DecompositionTerm(
                    complex(cr * parity), float(phi), tuple(pattern), col_rows, col_vals
                )
            )
    return RdmDecomposition(n, k, p, q, shared, p_only, q_only, sign, tuple(terms))


# ------------------------------------------------- full fast estimator

def _diag_estimate_from_block(w_block: np.ndarray, n: int, eta: int, k: int,
                              weights) -> float:
    """Estimate of the leading diagonal pattern from the eta x k block."""
    m = _m_from_block(w_block)
    t_list = inverse_trace_sequence(trace_powers(m, k), k, eta, k)
    derivs = _pf_derivative_recursion(float((-1) ** (n - k)), t_list, k)
    total = 0.0
    for x in range(k + 1):
        total += float(weights[x]) * derivs[x] / factorial(x)
    return ((-1) ** (n - k)) * total


def fast_estimate_rdm(shadow: ClassicalShadow, eta: int, k: int, p, q) -> complex:
    """Single-shadow transition estimate along the Pfaffian path.

    Equal to estimate_rdm up to roundoff, at O(k^2 eta) per term instead of
    O(C(n,k) k^3) total.
    """
    n = shadow.u.shape[0]
    assert eta == len(shadow.z)
    decomp = decompose_rdm(tuple(p), tuple(q), n)
    weights = alpha_coeffs(n, eta, k).derivative_weights
    zidx = np.asarray(shadow.z, dtype=np.int64) - 1
    acc = 0.0 + 0.0j
    for term in decomp.terms:
        cols = shadow.u[zidx[:, None, None], term.col_rows[None, :, :] - 1]
        w_block = (cols * term.col_vals[None, :, :]).sum(axis=2)
        acc += term.coeff * _diag_estimate_from_block(w_block, n, eta, k, weights)
    return complex(decomp.sign * acc)
