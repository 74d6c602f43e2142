"""Exception types shared across the package."""


class MultiwayError(Exception):
    """Base class for all package errors."""


class DomainError(MultiwayError, ValueError):
    """An argument lies outside the domain of the operation."""


class CapacityError(MultiwayError, RuntimeError):
    """An exhaustive enumeration would exceed its budget."""


class InfeasibleError(MultiwayError):
    """A problem has no feasible point.

    ``witness`` carries the phase-1 objective (sum of artificials) when the
    infeasibility was detected by the simplex solver.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NumericError(MultiwayError, ArithmeticError):
    """A non-finite value or a solver breakdown."""


class SubmodularityError(MultiwayError, ValueError):
    """A set function violated f(A) + f(B) >= f(A | B) + f(A & B)."""

    def __init__(self, message, sets=None, excess=None):
        super().__init__(message)
        self.sets = sets
        self.excess = excess
