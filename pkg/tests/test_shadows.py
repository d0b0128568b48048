from fractions import Fraction

import numpy as np
import pytest

from fermishadow.combinat import binom, rank_subset, subsets
from fermishadow.fock import basis_state, random_state, rdm_matrix
from fermishadow.shadows import (
    ClassicalShadow,
    RdmObservable,
    aggregate,
    avg_shadow_norm_sq,
    batch_estimate_matrices,
    collect_shadow_arrays,
    collect_shadows,
    estimate_observable,
    estimate_rdm,
    estimate_rdm_matrix,
    estimation_entry,
    estimation_matrix,
    q_slater,
    q_value,
    sample_shadow,
    shadows_from_jsonl,
    shadows_to_jsonl,
    trace_e_squared,
    variance_bound,
)


def test_estimation_entry_frozen():
    assert estimation_entry(2, 1, 1, 1) == 2
    assert estimation_entry(2, 1, 1, 0) == -1
    assert estimation_entry(3, 3, 1, 1) == 1
    assert estimation_entry(4, 2, 2, 3) == 0


def test_estimation_trace_is_eta_at_k1():
    for n in range(1, 9):
        for eta in range(1, n + 1):
            assert estimation_matrix(n, eta, 1).trace() == eta


def test_estimation_matrix_expand_frozen():
    e = estimation_matrix(4, 1, 1).expand()
    assert np.array_equal(e, np.array([4.0, -1.0, -1.0, -1.0]))
    assert trace_e_squared(4, 1, 1) == 19
    assert trace_e_squared(2, 1, 1) == 5


def test_trace_e_squared_matches_expand():
    for n in range(1, 8):
        for eta in range(1, n + 1):
            for k in range(1, eta + 1):
                e = estimation_matrix(n, eta, k).expand()
                assert abs(float(trace_e_squared(n, eta, k)) - np.sum(e * e)) < 1e-8


def test_per_shadow_norm_identity():
    rng = np.random.default_rng(11)
    for n, eta, k in [(2, 1, 1), (4, 2, 1), (4, 2, 2), (5, 3, 2)]:
        state = random_state(n, eta, rng)
        shadow = sample_shadow(state, seed=7, index=3)
        est = estimate_rdm_matrix(shadow, eta, k)
        want = float(trace_e_squared(n, eta, k))
        assert abs(np.sum(np.abs(est) ** 2) - want) < 1e-8 * want


def test_per_shadow_hermiticity():
    state = random_state(5, 2, np.random.default_rng(3))
    shadow = sample_shadow(state, seed=1, index=0)
    for k in (1, 2):
        est = estimate_rdm_matrix(shadow, 2, k)
        assert np.array_equal(est.conj().T, est)


def test_estimate_rdm_matches_matrix_entry():
    n, eta, k = 5, 3, 2
    state = random_state(n, eta, np.random.default_rng(8))
    shadow = sample_shadow(state, seed=21, index=5)
    est = estimate_rdm_matrix(shadow, eta, k)
    for p, q in [((1, 2), (1, 2)), ((1, 3), (2, 5)), ((4, 5), (1, 2))]:
        single = estimate_rdm(shadow, eta, k, p, q)
        assert abs(single - est[rank_subset(p), rank_subset(q)]) < 1e-10


def test_batch_matches_single():
    n, eta, k = 4, 2, 2
    state = random_state(n, eta, np.random.default_rng(5))
    us, zs = collect_shadow_arrays(state, 6, seed=13)
    batch = batch_estimate_matrices(us, zs, eta, k)
    for i in range(6):
        shadow = ClassicalShadow(us[i], tuple(int(m) for m in zs[i]), 13, i)
        assert np.allclose(batch[i], estimate_rdm_matrix(shadow, eta, k))


def test_collection_is_thread_and_index_deterministic():
    state = random_state(4, 2, np.random.default_rng(2))
    serial = collect_shadows(state, 7, seed=40, threads=1)
    threaded = collect_shadows(state, 7, seed=40, threads=3)
    tail = collect_shadows(state, 5, seed=40, start_index=2)
    for i in range(7):
        assert np.array_equal(serial[i].u, threaded[i].u)
        assert serial[i].z == threaded[i].z
        assert serial[i].index == i
        one = sample_shadow(state, seed=40, index=i)
        assert np.array_equal(serial[i].u, one.u)
        assert serial[i].z == one.z
        if i >= 2:
            assert np.array_equal(serial[i].u, tail[i - 2].u)
            assert serial[i].z == tail[i - 2].z


def test_effective_frame_invariance():
    # any frame row order fixing the readout block gives the same estimates
    from fermishadow.combinat import canonical_permutation

    rng = np.random.default_rng(31)
    n, eta, k = 6, 3, 2
    state = random_state(n, eta, rng)
    shadow = sample_shadow(state, seed=3, index=1)
    v = canonical_permutation(shadow.z, n)
    w = shadow.u[v - 1]
    ref = estimate_rdm_matrix(shadow, eta, k)
    for _ in range(3):
        perm = np.concatenate([rng.permutation(eta), eta + rng.permutation(n - eta)])
        u_alt = np.empty_like(shadow.u)
        u_alt[v - 1] = w[perm]
        alt = ClassicalShadow(u_alt, shadow.z, 0, 0)
        assert np.max(np.abs(estimate_rdm_matrix(alt, eta, k) - ref)) < 1e-10


def test_particle_number_estimate_is_exact():
    # sum_p D^p_p has a state-independent per-shadow estimate: the trace eta
    n, eta = 5, 3
    state = random_state(n, eta, np.random.default_rng(17))
    obs = RdmObservable(n, 1, np.eye(n))
    for index in range(4):
        shadow = sample_shadow(state, seed=9, index=index)
        got = estimate_observable(shadow, obs, eta)
        assert abs(got - eta) < 1e-9


def test_rdm_observable_from_terms():
    obs = RdmObservable.from_terms(4, 2, {((1, 2), (3, 4)): 2.0, ((1, 3), (1, 3)): 1j})
    assert obs.coeffs[rank_subset((1, 2)), rank_subset((3, 4))] == 2.0
    assert obs.coeffs[rank_subset((1, 3)), rank_subset((1, 3))] == 1j
    assert np.count_nonzero(obs.coeffs) == 2
    with pytest.raises(AssertionError):
        RdmObservable.from_terms(4, 2, {((1, 1), (1, 2)): 1.0})


def test_unbiased_against_dense_oracle():
    n, eta, k = 3, 1, 1
    state = random_state(n, eta, np.random.default_rng(23))
    truth = rdm_matrix(state, k)
    us, zs = collect_shadow_arrays(state, 6000, seed=77)
    ests = batch_estimate_matrices(us, zs, eta, k)
    for r in range(binom(n, k)):
        for c in range(binom(n, k)):
            val, err = aggregate(ests[:, r, c])
            sig = max(abs(err.real), abs(err.imag), 1e-12)
            assert abs(val - truth[r, c]) < 5 * np.sqrt(2) * sig


def test_aggregate_mean():
    val, err = aggregate([1.0, 2.0, 3.0, 4.0])
    assert val == 2.5
    assert abs(err.real - np.std([1, 2, 3, 4], ddof=1) / 2) < 1e-15
    assert err.imag == 0
    val, err = aggregate([2.0 + 2.0j])
    assert val == 2.0 + 2.0j and err == 0


def test_aggregate_median_of_means():
    data = [1.0, 2.0, 30.0, 4.0, 5.0, 6.0]
    val, _ = aggregate(data, mode="median_of_means", batches=3)
    assert val == np.median([1.5, 17.0, 5.5])
    with pytest.raises(AssertionError):
        aggregate(data, mode="median_of_means", batches=4)
    with pytest.raises(ValueError):
        aggregate(data, mode="trimmed")


def test_q_value_is_average_second_moment():
    for n in range(1, 8):
        for eta in range(1, n + 1):
            for k in range(1, eta + 1):
                assert q_value(n, eta, k) == trace_e_squared(n, eta, k) / binom(n, k) ** 2


def test_q_slater_matches_and_stays_bounded():
    for eta in range(1, 21):
        n = 2 * eta
        q = q_slater(n, eta)
        assert q == q_value(n, eta, eta)
        assert q <= Fraction(4, 3)
    assert q_slater(4, 2) > q_slater(6, 2)


def test_variance_bound_dominates_q():
    for n in range(1, 9):
        for eta in range(1, n + 1):
            for k in range(1, eta + 1):
                assert q_value(n, eta, k) <= variance_bound(n, eta, k)


def test_frozen_variance_quantities():
    assert q_value(2, 1, 1) == Fraction(5, 4)
    assert avg_shadow_norm_sq(2, 1, 1) == Fraction(9, 8)
    assert variance_bound(2, 1, 1) == Fraction(3, 2)


def test_jsonl_roundtrip():
    state = basis_state((1, 3), 4)
    shadows = collect_shadows(state, 3, seed=55)
    text = shadows_to_jsonl(shadows)
    assert text.endswith("\n")
    back = shadows_from_jsonl(text)
    assert len(back) == 3
    for a, b in zip(shadows, back):
        assert np.array_equal(a.u, b.u)
        assert a.z == b.z and a.seed == b.seed and a.index == b.index
    est_a = estimate_rdm_matrix(shadows[1], 2, 1)
    est_b = estimate_rdm_matrix(back[1], 2, 1)
    assert np.array_equal(est_a, est_b)
