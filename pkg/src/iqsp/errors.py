"""Exception hierarchy shared by all modules."""


class IqspError(Exception):
    """Base class for package errors."""


class DomainError(IqspError, ValueError):
    """An argument lies outside the operation's supported domain."""


class SymmetryError(DomainError):
    """A matrix that must be Hermitian is not."""


class PreconditionError(DomainError):
    """A documented precondition of an operation does not hold."""


class UnsupportedSizeError(DomainError):
    """The request exceeds the desk-scale size caps."""


class ConstructionError(IqspError, RuntimeError):
    """A polynomial or circuit could not be constructed within the caps."""


class SolverError(IqspError, RuntimeError):
    """A phase solver did not reach its tolerance.

    ``residual`` carries the best residual that was reached.
    """

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class PromiseViolation(IqspError, ValueError):
    """An input promise (such as a minimum separation) is violated."""


class PostselectionError(IqspError, RuntimeError):
    """A post-selection branch has (numerically) zero probability."""


class SimulationError(IqspError, RuntimeError):
    """A simulation could not proceed (e.g. vanishing success probability)."""
