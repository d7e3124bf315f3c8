"""Network-matching estimation for binary choice with endogenous networks."""

from .distance import (
    CodegreeMatrix,
    KernelSpec,
    QuadratureSpec,
    codegree_distance_matrix,
    kernel_weight,
    population_codegree_distance,
    population_network_distance,
    weight_matrix,
)
from .errors import (
    ConfigError,
    DegenerateMatchingError,
    DomainError,
    NetmatchError,
    PreconditionError,
    ValidationError,
)
from .estimators import (
    EstimationResult,
    EstimatorConfig,
    baseline_infeasible,
    baseline_naive,
    baseline_with_controls,
    estimate,
    estimate_beta,
    estimate_lambda,
    estimate_prob_y,
    fit_logit_mle,
    pairwise_objective,
)
from .model import (
    LatentDraws,
    LinkFunction,
    NetworkSample,
    TrueParameters,
    eval_link,
    lambda_true,
    logistic_cdf,
    logit,
    no_influence,
    simulate_sample,
)
from .montecarlo import StudyDesign, StudyReport, emit_report, run_replication, run_study

__version__ = "0.1.0"
