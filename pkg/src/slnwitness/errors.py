"""Exception hierarchy shared by all modules."""


class SLNError(Exception):
    """Base class for errors raised by :mod:`slnwitness`."""


class DomainError(SLNError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConsistencyError(SLNError, ArithmeticError):
    """A computed probability table violates its own invariants."""


class ConditioningError(SLNError, ZeroDivisionError):
    """Conditioning on an Alice outcome that has zero probability."""


class UnphysicalVectorError(SLNError, ValueError):
    """An independent-coordinate vector reconstructs to negative probabilities."""


class TailBoundError(SLNError, ValueError):
    """The Fock-space truncation leaves too much weight in the tail."""


class InfeasibleRegionError(SLNError, ValueError):
    """The constrained search region for the LO amplitudes is empty."""
