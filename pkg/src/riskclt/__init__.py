"""Plug-in estimators and normal limit laws for composite risk functionals."""
from .errors import (
    DegenerateInput,
    DegenerateSample,
    DimensionMismatch,
    DomainEscape,
    FlatQuantileWarning,
    IntegrationFailure,
    MissingJacobian,
    NonUniqueMinimizer,
    ParameterOutOfRange,
    ParseError,
    RiskCLTError,
    SolverFailure,
)
from .functional import (
    CompositeFunctional,
    DirectionBundle,
    MeanChain,
    SampleSet,
    StageFunction,
    evaluate_plugin,
    mean_chain,
    xi_recursion,
)
from .measures import (
    MeasureSpec,
    RiskEstimate,
    build_semideviation,
    coherence_check,
    estimate,
    estimate_avar,
    estimate_higher_order,
    estimate_semideviation,
)
from .optimizer import NestedOptimizedFunctional, OptimizedFunctional, SolveResult, solve
from .asymptotics import (
    CovarianceModel,
    covariance_empirical,
    limit_sd_avar,
    limit_sd_composite,
    limit_sd_higher_order,
    limit_sd_optimized,
    limit_sd_semideviation,
)
from .distributions import DistributionSpec, Empirical, Normal, PointMass, StudentT, oracle, sample
from .harness import ExperimentConfig, SimulationReport, ks_distance, run_experiment

__version__ = "0.1.0"
