"""Numerics for quantum soft covering, randomized codebooks, and decoupling.

The package builds finite dimensional covering and decoupling experiments,
measures how far their outputs sit from ideal targets in relative entropy,
and checks the one-shot bound expressions and supporting inequalities that
govern those experiments.
"""

from .errors import (
    MalformedInputError,
    NumericalError,
    PreconditionError,
    ResourceLimitError,
    SoftcoverError,
    SupportError,
    UnknownNameError,
)
from .linalg import (
    LOG2E,
    BipartiteState,
    DensityOperator,
    HermitianOperator,
    Purification,
    as_matrix,
    as_rng,
    canonical_purification,
    derive_seed,
    haar_unitary,
    operator_function,
    partial_trace,
    psd_log2,
    psd_power,
    random_density,
    random_pure,
    support_cutoff,
    swap_bipartite,
    trace_norm,
)
from .entropic import (
    DivergenceResult,
    SmoothingCertificate,
    aep_rate,
    classical_relative_entropy,
    classical_renyi_divergence,
    coherent_information,
    d_max,
    generalized_fidelity,
    h_min,
    h_min_bloch_grid,
    holevo_information,
    info_variance,
    min_dmax_over_marginal,
    minus_xlog2x,
    purified_distance,
    q2_tilde,
    relative_entropy,
    renyi_divergence,
    shannon_entropy,
    smooth_bound,
    von_neumann_entropy,
)
from .channels import (
    CQEnsemble,
    QuantumChannel,
    apply,
    apply_partial,
    channel_from_choi,
    channel_to_json,
    channel_from_json,
    choi,
    cq_as_channel,
    depolarizing_channel,
    ensemble_to_json,
    ensemble_from_json,
    identity_channel,
    random_channel,
    stinespring,
)
from .cqcover import (
    Codebook,
    CQJoint,
    Theorem3Terms,
    classical_bound,
    converse_certificate,
    cq_joint,
    exact_expectation,
    jensen_intermediate,
    mix_codebook,
    q2_cq,
    sample_codebook,
    theorem3_terms,
)
from .decouple import (
    DecoupleInstance,
    additive_slack,
    decouple_trial,
    q2_factors,
    q2_product_bound,
    theorem5_terms,
)
from .lemmas import LEMMA_IDS, LemmaAuditRecord, lemma_audit
from .qcover import (
    BlockCode,
    CoverOutcome,
    QCoverInstance,
    Theorem1Terms,
    build_instance,
    expected_divergence_bound,
    extract_block,
    mc_expectation,
    per_copy_bound,
    q2_target,
    sample_block_code,
    simulate,
    theorem1_terms,
)

__version__ = "0.1.0"
