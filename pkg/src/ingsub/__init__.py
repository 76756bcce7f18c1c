"""Simulation and parameter estimation for incomplete gamma subordinators."""

from .errors import (
    BracketError,
    ConvergenceError,
    DegenerateInputError,
    DomainError,
    EstimationError,
    InfeasibleMomentsError,
    IngsubError,
)
from .estimators import (
    EstimateReport,
    Estimator,
    MomentEquations,
    VarianceModel,
    fracmom_alpha,
    mle_alpha_from_excess,
    mle_alpha_ing,
    mle_alpha_ing_eps,
    mle_asymptotic_ci,
    mom_ting,
    score_ing,
)
from .harness import McConfig, McSummary, emit_table, run_mc, summarize
from .sim import (
    Family,
    ModelParams,
    PathSample,
    RngStream,
    jump_cdf_ing,
    jump_cdf_ing_excess,
    poisson_rate,
    sample_jump_ing,
    sample_jump_ing_eps,
    sample_jump_ting,
    sample_path,
    sample_values,
)
from .specfun import Accuracy, log_gamma, reg_inc_beta, upper_inc_gamma

__version__ = "0.1.0"

__all__ = [
    "BracketError",
    "ConvergenceError",
    "DegenerateInputError",
    "DomainError",
    "EstimationError",
    "InfeasibleMomentsError",
    "IngsubError",
    "EstimateReport",
    "Estimator",
    "MomentEquations",
    "VarianceModel",
    "fracmom_alpha",
    "mle_alpha_from_excess",
    "mle_alpha_ing",
    "mle_alpha_ing_eps",
    "mle_asymptotic_ci",
    "mom_ting",
    "score_ing",
    "Family",
    "ModelParams",
    "PathSample",
    "RngStream",
    "jump_cdf_ing",
    "jump_cdf_ing_excess",
    "poisson_rate",
    "sample_jump_ing",
    "sample_jump_ing_eps",
    "sample_jump_ting",
    "sample_path",
    "sample_values",
    "McConfig",
    "McSummary",
    "emit_table",
    "run_mc",
    "summarize",
    "Accuracy",
    "log_gamma",
    "reg_inc_beta",
    "upper_inc_gamma",
]
