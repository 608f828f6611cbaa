"""Exception hierarchy shared by all estimators."""


class EstimationError(Exception):
    """Base class for every error raised by the package."""


class SolverError(EstimationError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NotPositiveDefiniteError(EstimationError):
    """Cholesky factorization hit a non-positive pivot."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class SampleSizeError(EstimationError):
    """The sample is too small for the requested configuration."""


class RankDeficiencyError(EstimationError):
    """Leading eigenvalues are not strictly positive."""


class InfeasibleError(EstimationError):
    """A constrained problem has no feasible point."""
