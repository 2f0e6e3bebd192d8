"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`DomainError`
(mapped to exit code 2 by the CLI) or :class:`SolverError` (exit code 3).
"""


class DomainError(ValueError):
    """Input violates a mathematical precondition."""


class SolverError(RuntimeError):
    """A linear program could not be solved to the required accuracy."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class InvalidStateSpace(DomainError):
    pass


class NotInterior(DomainError):
    """A reference state lies on (or too close to) the boundary."""


class Degenerate(DomainError):
    pass


class RankDeficient(DomainError):
    pass


class DimensionOverflow(DomainError):
    pass


class EnumerationOverflow(DomainError):
    pass


class SupportMismatch(DomainError):
    pass


class EnclosureTooWide(DomainError):
    pass


class InfeasibleRelaxation(DomainError):
    """The outer relaxation is empty, hence so is the original problem."""


class LiftInconsistent(DomainError):
    pass


class NoFeasibleTerm(DomainError):
    pass
