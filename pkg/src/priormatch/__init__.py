"""Prior predictive moment matching for Poisson-family matrix factorization.

Select hyperparameters (including the latent dimension) of Poisson,
compound-Poisson and hierarchical Poisson factorization models by matching
moments of the prior predictive distribution to targets: exactly via closed
forms where they exist, otherwise by stochastic gradient-based matching over
reparameterized generative models.
"""

from .analytic import (
    InverseSolution,
    MomentSet,
    cpmf_forward_moments,
    cpmf_moments_from_values,
    cpmf_solve,
    pmf_covariance,
    pmf_forward_moments,
    pmf_moments_from_values,
    pmf_solve,
    rate_constraint,
    solution_hyper_values,
)
from .dispersion import EdFamily, poisson_normal, unit_summand
from .empirical import MomentEstimate, estimate_k, estimate_moments
from .errors import (
    DataShapeError,
    DomainError,
    EstimatorError,
    FeasibilityError,
    GradientError,
    ModelSpecError,
    OptimizationError,
    PriorMatchError,
)
from .layered import LayeredModel, Node, OutputNode, hpf_model, model_for, pmf_model
from .matching import (
    GradientCheckReport,
    MatchProblem,
    MatchResult,
    MomentGrad,
    OptimizerConfig,
    Regularizer,
    SampleBudget,
    STATUS_BOUNDARY,
    STATUS_CONVERGED,
    STATUS_MAX_ITERATIONS,
    TracePoint,
    estimate_prior_moments,
    gradient_check,
    match,
    output_conditional_moments,
    reparam_gamma,
    reparam_normal,
    sampled_discrete_expectation,
)
from .params import (
    CpmfHyper,
    GammaParams,
    HpfHyper,
    MEAN_STD,
    MeanStdParams,
    PmfHyper,
    SHAPE_RATE,
    UnconstrainedVector,
    gamma_from_meanstd,
    hyper_from_json,
    hyper_to_json,
    meanstd_from_gamma,
    pack,
    unpack,
)
from .sampling import RngHandle, sample_gamma, simulate_cpmf, simulate_hpf, simulate_pmf

__version__ = "0.1.0"

__all__ = [
    "CpmfHyper",
    "DataShapeError",
    "DomainError",
    "EdFamily",
    "EstimatorError",
    "FeasibilityError",
    "GammaParams",
    "GradientCheckReport",
    "GradientError",
    "HpfHyper",
    "InverseSolution",
    "LayeredModel",
    "MatchProblem",
    "MatchResult",
    "MeanStdParams",
    "MEAN_STD",
    "ModelSpecError",
    "MomentEstimate",
    "MomentGrad",
    "MomentSet",
    "Node",
    "OptimizationError",
    "OptimizerConfig",
    "OutputNode",
    "PmfHyper",
    "PriorMatchError",
    "Regularizer",
    "RngHandle",
    "SampleBudget",
    "SHAPE_RATE",
    "STATUS_BOUNDARY",
    "STATUS_CONVERGED",
    "STATUS_MAX_ITERATIONS",
    "TracePoint",
    "UnconstrainedVector",
    "cpmf_forward_moments",
    "cpmf_moments_from_values",
    "cpmf_solve",
    "estimate_k",
    "estimate_moments",
    "estimate_prior_moments",
    "gamma_from_meanstd",
    "gradient_check",
    "hpf_model",
    "hyper_from_json",
    "hyper_to_json",
    "match",
    "meanstd_from_gamma",
    "model_for",
    "output_conditional_moments",
    "pack",
    "pmf_covariance",
    "pmf_forward_moments",
    "pmf_model",
    "pmf_moments_from_values",
    "pmf_solve",
    "poisson_normal",
    "rate_constraint",
    "reparam_gamma",
    "reparam_normal",
    "sample_gamma",
    "sampled_discrete_expectation",
    "simulate_cpmf",
    "simulate_hpf",
    "simulate_pmf",
    "solution_hyper_values",
    "unit_summand",
    "unpack",
]
