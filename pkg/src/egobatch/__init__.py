"""Kriging-based sequential optimization with batch selection via randomized
QMC importance resampling, plus a benchmark harness."""

from .acquisition import ExpectedImprovement, build_scan_set, maximize_ei, ranked_maximizers
from .bench import (
    Campaign,
    ChildExitError,
    EvaluationTimeout,
    ExperimentSpec,
    ExternalObjective,
    ProtocolError,
    SummaryRow,
    external_objective,
    run_campaign,
    run_replicate,
    summarize_directory,
)
from .core import (
    DUP_TOL,
    Design,
    Domain,
    DuplicatePointError,
    Objective,
    OutOfDomainError,
    PoolExhaustedError,
    SingularCorrelationError,
    TooFewPointsError,
    UnknownFunctionError,
    make_rng,
)
from .kriging import KrigingSurrogate, concentrated_log_likelihood
from .qmc import (
    CandidatePool,
    DimensionUnsupportedError,
    ShiftedPool,
    default_pool_size,
    lhs_initial_design,
    pool_from_csv,
    pool_to_csv,
    random_shift,
    sobol_pool,
    sobol_unit,
    wrap_into_domain,
)
from .sir import WeightedPool, resample, weigh
from .strategies import EGO, AcceleratedEGO, ConstantLiar, RunRecord, StageResult, StopRule
from .testfns import TestFunction, catalog_names, lookup

__version__ = "0.1.0"

__all__ = [
    "AcceleratedEGO",
    "Campaign",
    "CandidatePool",
    "ChildExitError",
    "ConstantLiar",
    "Design",
    "DimensionUnsupportedError",
    "Domain",
    "DuplicatePointError",
    "DUP_TOL",
    "EGO",
    "EvaluationTimeout",
    "ExpectedImprovement",
    "ExperimentSpec",
    "ExternalObjective",
    "external_objective",
    "KrigingSurrogate",
    "lhs_initial_design",
    "lookup",
    "make_rng",
    "maximize_ei",
    "Objective",
    "OutOfDomainError",
    "PoolExhaustedError",
    "pool_from_csv",
    "pool_to_csv",
    "ProtocolError",
    "random_shift",
    "ranked_maximizers",
    "resample",
    "RunRecord",
    "run_campaign",
    "run_replicate",
    "ShiftedPool",
    "SingularCorrelationError",
    "sobol_pool",
    "sobol_unit",
    "StageResult",
    "StopRule",
    "summarize_directory",
    "SummaryRow",
    "TestFunction",
    "TooFewPointsError",
    "UnknownFunctionError",
    "weigh",
    "WeightedPool",
    "wrap_into_domain",
    "catalog_names",
    "concentrated_log_likelihood",
    "default_pool_size",
    "Design",
]
