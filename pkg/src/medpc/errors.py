"""Exception types raised across the package."""


class MedPCError(Exception):
    """Base class for all package errors."""


class PositivityViolation(MedPCError, ValueError):
    """A probability used as a denominator is too close to zero."""

    def __init__(self, name, value, eps):
        self.name = name
        self.value = float(value)
        self.eps = eps
        super().__init__(f"positivity violated: {name} = {self.value:.3g} < {eps:g}")


class DomainError(MedPCError, ValueError):
    """A covariate value lies outside the supported domain."""


class DegenerateConditioning(MedPCError, ValueError):
    """A conditioning event has (numerically) zero probability."""


class ConvergenceFailure(MedPCError, RuntimeError):
    """An iterative solver did not reach its tolerance."""


class EmptySubset(MedPCError, ValueError):
    """No records fall into the requested fitting subset."""


class BadFoldCount(MedPCError, ValueError):
    """Invalid number of cross-fitting folds for the sample size."""


class SingularDesign(MedPCError, ValueError):
    """The weighted Gram / bread matrix is singular."""


class SimulationFailure(MedPCError, RuntimeError):
    """Too many Monte-Carlo replicates raised errors."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
