"""Randomized measurements for fixed-particle-number fermionic states.

Sample occupation readouts after Haar mode rotations, invert the
measurement channel in closed form, and estimate every k-body transition
amplitude of an eta-particle state, either from a dense estimation
operator or along an O(k^2 eta) Pfaffian route.

Modules
-------
    combinat   : subsets in colex order, binomials, permutation helpers
    linalg     : Haar sampling, minors, compounds, Pfaffians
    fock       : dense eta-particle states, transitions, sampling
    channel    : exact algebra of the measurement channel
    shadows    : the protocol itself plus variance bookkeeping
    fastpath   : the Pfaffian estimator
    identities : brute-vs-closed verification sums
    cli        : command-line entry points
"""

from .combinat import binom, rank_subset, subsets, unrank_subset
from .fock import (
    FermionState,
    basis_state,
    expectation_rdm,
    random_state,
    rdm_matrix,
    slater_superposition,
)
from .channel import (
    ChannelSpec,
    DiagonalOperator,
    apply_channel_diagonal,
    inverse_channel_on_projector,
    structure_factor,
    symmetrized_difference,
)
from .shadows import (
    ClassicalShadow,
    RdmObservable,
    aggregate,
    avg_shadow_norm_sq,
    collect_shadows,
    estimate_observable,
    estimate_rdm,
    estimate_rdm_matrix,
    estimation_matrix,
    q_value,
    sample_shadow,
    variance_bound,
)
from .fastpath import fast_estimate_rdm

__all__ = [
    "binom",
    "rank_subset",
    "subsets",
    "unrank_subset",
    "FermionState",
    "basis_state",
    "expectation_rdm",
    "random_state",
    "rdm_matrix",
    "slater_superposition",
    "ChannelSpec",
    "DiagonalOperator",
    "apply_channel_diagonal",
    "inverse_channel_on_projector",
    "structure_factor",
    "symmetrized_difference",
    "ClassicalShadow",
    "RdmObservable",
    "aggregate",
    "avg_shadow_norm_sq",
    "collect_shadows",
    "estimate_observable",
    "estimate_rdm",
    "estimate_rdm_matrix",
    "estimation_matrix",
    "q_value",
    "sample_shadow",
    "variance_bound",
    "fast_estimate_rdm",
]

__version__ = "0.1.0"
