"""Semantic exceptions shared across the package."""


class IntermitError(Exception):
    """Base error for this package."""


class DomainError(IntermitError, ValueError):
    """Input outside the documented domain (point not in [0,1], bad parameters)."""


class MapConstructionError(IntermitError, ValueError):
    """A requested map family cannot be built (exponent out of range, broken branch)."""


class TruncationError(IntermitError):
    """An orbit did not return within the allotted horizon.

    Signals truncation of the computation, not absence of a return.
    """


class LevelTruncationError(IntermitError):
    """A point's excursion exceeds the stored level table (m > m_max)."""


class BoundaryError(IntermitError):
    """A point sits within tolerance of a partition boundary; classification refused."""


class AdmissibilityError(IntermitError, ValueError):
    """Two symbolic blocks are not composable (image component != base component)."""


class InfeasibleError(IntermitError):
    """A requested construction is empty or exceeds its search budget."""


class CertificateError(IntermitError):
    """A machine-checkable certificate failed; carries the first witness."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness
