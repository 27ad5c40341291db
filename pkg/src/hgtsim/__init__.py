"""Adaptive pairwise network formation with latent-type production models.

Pipeline per batch: realize beliefs (posterior-mean production parameters,
sampled agent types), solve a constrained maximum-weight pairing, observe
outcomes, re-estimate by mean-field variational EM, and fold the estimates
back into the running beliefs as Gaussian/categorical signals.
"""

from .matching import (
    InfeasibleError,
    MatchConstraints,
    MatchResult,
    TypeAllocation,
    bruteforce_matching,
    realize_edges,
    solve_matching,
    solve_type_allocation,
)
from .posterior import (
    GaussianBelief,
    LabelPermutation,
    PosteriorState,
    align_labels,
    apply_permutation,
    map_types,
    reset_agent,
    state_from_json,
    state_to_json,
    uninformative_state,
    update_categorical,
    update_gaussian,
)
from .variational import (
    BatchEstimate,
    EmSettings,
    EstimationError,
    VariationalPosterior,
    e_step,
    effective_counts,
    elbo,
    fit,
    m_step,
    standard_errors,
)
from .wsbm import (
    OutcomeVector,
    PairingPlan,
    ProductionMatrix,
    TypeDistribution,
    TypeVector,
    as_rng,
    complete_loglik,
    expected_weight,
    marginal_loglik_bruteforce,
    sample_outcomes,
    sample_types,
)

__version__ = "0.1.0"
