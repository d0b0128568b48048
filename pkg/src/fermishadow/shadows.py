"""Randomized-measurement protocol: sampling, estimation, variance bookkeeping.

One round draws a Haar unitary u, rotates the eta-particle state by the
compound of u, and reads out an occupation subset z.  The estimator for a
k-body transition (p, q) conjugates a fixed diagonal estimation operator by
the compound of v_z^dag u, where v_z relabels z to the first eta modes.

Randomness is counter-based: shadow i of a run seeded with s uses its own
Philox generator keyed by (s, i), so serial and concurrent collection give
bit-identical shadows.

Contents
--------
    ClassicalShadow, shadow_rng, sample_shadow, collect_shadows
    collect_shadow_arrays      : batched (U, Z) collection
    estimation_entry           : overlap-class value of the estimation operator
    estimation_matrix          : the diagonal estimation operator on k-subsets
    trace_e_squared            : exact Tr of its square
    estimate_rdm               : one transition estimate from one shadow
    estimate_rdm_matrix        : all k-body estimates from one shadow
    batch_estimate_matrices    : same, over stacked shadows
    RdmObservable, estimate_observable : linear functionals of the estimates
    aggregate                  : mean / median-of-means over many shadows
    avg_shadow_norm_sq, q_value, q_slater, variance_bound
    shadows_to_jsonl, shadows_from_jsonl
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

import numpy as np

from .combinat import binom, canonical_permutation, falling, rank_subset, validate_subset
from .channel import overlap_class_array
from .fock import FermionState
from .linalg import compound_batch, ginibre, minors_batch, subset_index_array, unitary_from_ginibre


@dataclass
class ClassicalShadow:
    """One measurement round: the rotation used, the readout, and its stream."""

    u: np.ndarray
    z: tuple
    seed: int
    index: int


def shadow_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator owned by shadow (seed, index)."""
    assert 0 <= seed < 2**64 and 0 <= index < 2**64
    return np.random.Generator(np.random.Philox(key=np.array([seed, index], dtype=np.uint64)))


def _draw_ranks(probs: np.ndarray, u01: np.ndarray) -> np.ndarray:
    cum = np.cumsum(probs, axis=1)
    idx = (cum <= u01[:, None]).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def collect_shadow_arrays(state: FermionState, count: int, seed: int,
                          start_index: int = 0, chunk: int = 8192):
    """Collect shadows as stacked arrays (U (N,n,n), Z (N,eta) 1-based)."""
    n, eta = state.n, state.eta
    us = np.empty((count, n, n), dtype=np.complex128)
    zs = np.empty((count, eta), dtype=np.int64)
    ranks = subset_index_array(n, eta) + 1
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        gin = np.empty((hi - lo, n, n), dtype=np.complex128)
        u01 = np.empty(hi - lo)
        for i in range(lo, hi):
            rng = shadow_rng(seed, start_index + i)
            gin[i - lo] = ginibre(n, rng)
            u01[i - lo] = rng.random()
        u = unitary_from_ginibre(gin)
        rotated = compound_batch(u, eta) @ state.amps
        probs = np.abs(rotated) ** 2
        totals = probs.sum(axis=1)
        assert np.max(np.abs(totals - 1.0)) <= 1e-6, "probability defect"
        us[lo:hi] = u
        zs[lo:hi] = ranks[_draw_ranks(probs / totals[:, None], u01)]
    return us, zs


def sample_shadow(state: FermionState, seed: int, index: int = 0) -> ClassicalShadow:
    """One shadow from the stream (seed, index)."""
    u, z = collect_shadow_arrays(state, 1, seed, start_index=index)
    return ClassicalShadow(u[0], tuple(int(m) for m in z[0]), seed, index)


def collect_shadows(state: FermionState, count: int, seed: int,
                    start_index: int = 0, threads: int = None) -> list:
    """Collect `count` shadows; the thread count never changes the result."""
    if threads is None:
        threads = int(os.environ.get("FERMISHADOW_THREADS", "1"))
    assert threads >= 1
    bounds = np.linspace(0, count, threads + 1).astype(int)
    jobs = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def run(job):
        lo, hi = job
        return collect_shadow_arrays(state, hi - lo, seed, start_index=start_index + lo)

    if len(jobs) <= 1:
        parts = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, jobs))
    out = []
    for (lo, hi), (u, z) in zip(jobs, parts):
        for i in range(hi - lo):
            out.append(ClassicalShadow(u[i], tuple(int(m) for m in z[i]),
                                       seed, start_index + lo + i))
    return out


# ------------------------------------------------- estimation operator

def estimation_entry(n: int, eta: int, k: int, s_prime: int) -> Fraction:
    """Diagonal value of the estimation operator on the class s' = |r cap [eta]|.

    r runs over k-subsets in the frame where the readout occupies the first
    eta modes.  Vanishing binomials give 0.
    """
    assert 0 <= k <= eta <= n
    if not 0 <= s_prime <= k:
        return Fraction(0)
    num = binom(eta - s_prime, k - s_prime) * binom(n - eta + s_prime, s_prime)
    if num == 0:
        return Fraction(0)
    return Fraction((-1) ** (k + s_prime) * num, binom(k, s_prime))


@dataclass
class EstimationMatrix:
    """Diagonal estimation operator on the k-subset sector, exact class values."""

    n: int
    eta: int
    k: int
    class_values: tuple

    def expand(self) -> np.ndarray:
        """Float diagonal over all k-subsets of [n], colex order."""
        cls = np.array([float(v) for v in self.class_values])
        return cls[overlap_class_array(self.n, self.k, self.eta)]

    def trace(self) -> Fraction:
        return sum(
            binom(self.eta, s) * binom(self.n - self.eta, self.k - s) * v
            for s, v in enumerate(self.class_values)
        )


def estimation_matrix(n: int, eta: int, k: int) -> EstimationMatrix:
    return EstimationMatrix(
        n, eta, k, tuple(estimation_entry(n, eta, k, s) for s in range(k + 1))
    )


def trace_e_squared(n: int, eta: int, k: int) -> Fraction:
    """Tr[E^2]: class multiplicities times squared entries; drives the variance."""
    return sum(
        binom(eta, s) * binom(n - eta, k - s) * estimation_entry(n, eta, k, s) ** 2
        for s in range(k + 1)
    )


# ------------------------------------------------- estimators

def _effective_rotation(u: np.ndarray, z) -> np.ndarray:
    """Rows of u gathered so the readout subset sits on the first eta modes."""
    return u[canonical_permutation(z, u.shape[0]) - 1, :]


def estimate_rdm(shadow: ClassicalShadow, eta: int, k: int, p, q) -> complex:
    """Single-shadow estimate of the transition (p, q).

    Cost O(C(n,k) k^3): only the two needed compound columns are formed.
    """
    n = shadow.u.shape[0]
    assert eta == len(shadow.z)
    p = validate_subset(p, n)
    q = validate_subset(q, n)
    assert len(p) == len(q) == k
    if rank_subset(p) > rank_subset(q):
        # evaluate the canonical orientation so conj(est(p,q)) == est(q,p) exactly
        return complex(estimate_rdm(shadow, eta, k, q, p)).conjugate()
    w = _effective_rotation(shadow.u, shadow.z)
    rows = subset_index_array(n, k)
    cols = np.array([p, q], dtype=np.int64) - 1
    b = minors_batch(w[None], rows, cols)[0]        # [r, 0] = <r|..|p>, [r, 1] = <r|..|q>
    e = estimation_matrix(n, eta, k).expand()
    return complex(np.sum(b[:, 1].conj() * e * b[:, 0]))


def estimate_rdm_matrix(shadow: ClassicalShadow, eta: int, k: int) -> np.ndarray:
    """All k-body estimates from one shadow; entry [rank p, rank q]."""
    out = batch_estimate_matrices(shadow.u[None], np.array([shadow.z]), eta, k)
    return out[0]


def batch_estimate_matrices(us: np.ndarray, zs: np.ndarray, eta: int, k: int,
                            chunk: int = 4096) -> np.ndarray:
    """Estimate matrices for stacked shadows: (N, C(n,k), C(n,k)).

    Entry [i, rank p, rank q] is shadow i's estimate for the transition
    (p, q); each slice is hermitian.
    """
    n = us.shape[-1]
    count = us.shape[0]
    e = estimation_matrix(n, eta, k).expand()
    cdim = e.size
    mask = np.zeros((count, n), dtype=bool)
    mask[np.arange(count)[:, None], zs - 1] = True
    order = np.argsort(~mask, axis=1, kind="stable")
    out = np.empty((count, cdim, cdim), dtype=np.complex128)
    for lo in range(0, count, chunk):
        hi = min(lo + chunk, count)
        ueff = us[lo:hi][np.arange(hi - lo)[:, None], order[lo:hi], :]
        b = compound_batch(ueff, k)
        block = np.einsum("nrq,r,nrp->npq", b.conj(), e, b)
        # exact hermiticity, not just up to rounding of the contraction order
        out[lo:hi] = (block + block.conj().transpose(0, 2, 1)) * 0.5
    return out


@dataclass
class RdmObservable:
    """Linear functional of the k-body transitions: sum_pq coeffs[p, q] D^p_q.

    coeffs is a C(n,k) x C(n,k) array indexed by colex ranks of (p, q).
    """

    n: int
    k: int
    coeffs: np.ndarray

    def __post_init__(self):
        dim = binom(self.n, self.k)
        self.coeffs = np.asarray(self.coeffs, dtype=np.complex128)
        assert self.coeffs.shape == (dim, dim)

    @classmethod
    def from_terms(cls, n: int, k: int, terms: dict) -> "RdmObservable":
        """Build from a {(p, q): coefficient} mapping of 1-based k-subsets."""
        dim = binom(n, k)
        coeffs = np.zeros((dim, dim), dtype=np.complex128)
        for (p, q), c in terms.items():
            coeffs[rank_subset(validate_subset(p, n)), rank_subset(validate_subset(q, n))] += c
        return cls(n, k, coeffs)


def estimate_observable(shadow: ClassicalShadow, obs: RdmObservable, eta: int) -> complex:
    """Estimate the observable's expectation from one shadow."""
    assert shadow.u.shape[0] == obs.n
    est = estimate_rdm_matrix(shadow, eta, obs.k)
    return complex(np.sum(obs.coeffs * est))


def aggregate(values, mode: str = "mean", batches: int = None):
    """Combine per-shadow estimates into (value, error).

    mean: arithmetic mean with the standard error s/sqrt(N) (ddof=1) per real
    and imaginary part.  median_of_means: equal batches (batches must divide
    the length), coordinate-wise median of the batch means, spread of the
    batch means as the error.
    """
    x = np.asarray(values, dtype=np.complex128)
    nsamp = x.size
    assert nsamp > 0
    if mode == "mean":
        val = complex(x.mean())
        if nsamp == 1:
            return val, complex(0)
        err_re = x.real.std(ddof=1) / np.sqrt(nsamp)
        err_im = x.imag.std(ddof=1) / np.sqrt(nsamp)
        return val, complex(err_re + 1j * err_im)
    if mode == "median_of_means":
        assert batches is not None and batches >= 1
        assert nsamp % batches == 0, "batches must divide the sample count"
        means = x.reshape(batches, -1).mean(axis=1)
        val = complex(np.median(means.real) + 1j * np.median(means.imag))
        if batches == 1:
            return val, complex(0)
        err_re = means.real.std(ddof=1) / np.sqrt(batches)
        err_im = means.imag.std(ddof=1) / np.sqrt(batches)
        return val, complex(err_re + 1j * err_im)
    raise ValueError(f"unknown mode {mode!r}")


# ------------------------------------------------- variance closed forms

def avg_shadow_norm_sq(n: int, eta: int, k: int) -> Fraction:
    """Pair-averaged second moment of the estimator, state independent."""
    c = binom(n, k)
    return trace_e_squared(n, eta, k) / c**2 - Fraction(
        binom(n - k, eta - k) ** 2, binom(n, eta) ** 2 * c
    )


def q_value(n: int, eta: int, k: int) -> Fraction:
    """Variance scale Q: the worst diagonal second moment, exact."""
    total = Fraction(0)
    for s in range(k + 1):
        total += (
            binom(k, s)
            * Fraction(falling(n - eta + k - s, k), falling(n, k))
            * Fraction(
                factorial(eta - k + s) * factorial(n - eta + k - s) * factorial(n - k),
                factorial(n) * factorial(eta - k) * factorial(n - eta),
            )
        )
    return binom(eta, k) * total


def q_slater(n: int, eta: int) -> Fraction:
    """Q at k = eta, the overlap-estimation regime, as its own sum."""
    total = Fraction(0)
    for s in range(min(eta, n - eta) + 1):
        total += Fraction(
            falling(eta, s) * falling(n - eta, s) * factorial(n - s) ** 2,
            factorial(n) ** 2,
        )
    return total


def variance_bound(n: int, eta: int, k: int) -> Fraction:
    """Closed-form upper bound on Q."""
    return (
        binom(eta, k)
        * (1 - Fraction(eta - k, n)) ** k
        * Fraction(n + 1, n + 1 - k)
    )


# ------------------------------------------------- serialization

def shadows_to_jsonl(shadows) -> str:
    lines = []
    for s in shadows:
        body = {
            "seed": s.seed,
            "index": s.index,
            "u": [[[float(v.real), float(v.imag)] for v in row] for row in s.u],
            "z": list(s.z),
        }
        lines.append(json.dumps(body))
    return "\n".join(lines) + "\n"


def shadows_from_jsonl(text: str) -> list:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        body = json.loads(line)
        u = np.array([[complex(re, im) for re, im in row] for row in body["u"]])
        out.append(ClassicalShadow(u, tuple(body["z"]), body["seed"], body["index"]))
    return out
