"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Vector or matrix shapes do not agree."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation (negative rate, bad step)."""


class InvalidDegreeError(ValueError):
    """Requested left degree cannot be realised by a simple bipartite graph."""


class NormalizationError(ValueError):
    """A sensing matrix that must be column-stochastic is not."""


class InfeasibleLikelihoodError(RuntimeError):
    """The Poisson likelihood is zero at every reachable iterate."""


class SolverFailure(RuntimeError):
    """An iterative solver exhausted its budget without meeting its tolerances."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(f"{message} (residual={residual:.3e}, iterations={iterations})")
        self.residual = residual
        self.iterations = iterations
