"""Simulation and Bayes-optimal detection of a Poisson intensity change-set.

A planar Poisson process switches its intensity from ``mu0`` to ``mu1`` on
an unobservable random staircase region.  This package simulates the
model, computes the posterior gain-rate field observable from the data,
builds the first-exit stopping set and the induced change-region estimate,
and verifies the construction against brute-force oracles.
"""

from .geometry import (
    GridSpec,
    LayerMask,
    Point2,
    UpperLayer,
    area_in_rect,
    contains,
    layer_area_general,
    leq,
    normalize,
    strictly_below,
)
from .priors import (
    DensityTable,
    DetectionParams,
    PriorModel,
    check_theorem_conditions,
    odds_factor,
    prob_no_jump,
    sample_changeset,
    weak_hazard,
)
from .simulate import PointPattern, count_in_rect, sample_observation, sample_pair
from .posterior import (
    EvidenceEstimator,
    PosteriorField,
    QuadratureNonconvergenceError,
    compute_posterior_field,
    compute_posterior_field_support,
    evidence_exact_single_jump,
    evidence_montecarlo,
    log_lik_given_changeset,
    make_exact_estimator,
    make_mc_estimator,
    posterior_no_change,
    true_gain_rate,
)
from .detector import (
    ChangeEstimate,
    StoppingSet,
    estimate_changeset,
    monotone_check,
    no_info_baseline,
    stopping_set_from_field,
)
from .gain import (
    EstimatorSpec,
    GainReport,
    expected_gain,
    gain,
    projection_identity_check,
    run_replications,
    summarize_gains,
)
from .oracles import (
    compensator_oracle,
    discrete_bayes_oracle,
    is_posterior_oracle,
)

__version__ = "0.1.0"
