"""Signal recovery: Poisson pMLE, basis pursuit, whale isolation and bounds."""

from .basis_pursuit import direct_bp, direct_rate_estimate
from .bounds import bound_theorem1, bound_theorem2, bound_theorem3
from .penalties import (
    PenaltyModel,
    discrete_pmle,
    kraft_ok,
    kraft_sum,
    quantized_candidates,
    quantized_penalty,
    satisfies_floor,
)
from .spiral import RecoveryResult, SolverConfig, pmle_spiral_l1, project_capped_simplex, restricted_pmle
from .whales import WhaleIsolationResult, whale_isolation

__all__ = [
    "PenaltyModel",
    "RecoveryResult",
    "SolverConfig",
    "WhaleIsolationResult",
    "bound_theorem1",
    "bound_theorem2",
    "bound_theorem3",
    "direct_bp",
    "direct_rate_estimate",
    "discrete_pmle",
    "kraft_ok",
    "kraft_sum",
    "pmle_spiral_l1",
    "project_capped_simplex",
    "quantized_candidates",
    "quantized_penalty",
    "restricted_pmle",
    "satisfies_floor",
    "whale_isolation",
]
