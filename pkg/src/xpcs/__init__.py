"""Sparse recovery from Poisson counts through expander-graph sensing."""

from .errors import (
    DimensionError,
    DomainError,
    InfeasibleLikelihoodError,
    InvalidDegreeError,
    NormalizationError,
    SolverFailure,
)
from .expander import (
    ExpanderGraph,
    ExpansionParams,
    ExpansionReport,
    SensingOperator,
    apply,
    apply_transpose,
    generate_expander,
    k_term_error,
    sample_expansion,
)
from .poisson import IntensityVector, L1Estimate, Observation

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "DomainError",
    "ExpanderGraph",
    "ExpansionParams",
    "ExpansionReport",
    "InfeasibleLikelihoodError",
    "IntensityVector",
    "InvalidDegreeError",
    "L1Estimate",
    "NormalizationError",
    "Observation",
    "SensingOperator",
    "SolverFailure",
    "apply",
    "apply_transpose",
    "generate_expander",
    "k_term_error",
    "sample_expansion",
]
