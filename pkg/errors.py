class WidthError(Exception):
    """Base class for every error raised by the width library."""


class DomainError(WidthError, ValueError):
    """A point or a test-function support lies outside the admissible domain."""


class InvalidParameterError(WidthError, ValueError):
    """A parameter is outside its admissible range."""


class FamilyMismatchError(WidthError, TypeError):
    """Snapshots from incompatible families were mixed in one Gram matrix."""


class NotOrthonormalError(WidthError, ValueError):
    """A coefficient basis is not orthonormal against its Gram matrix."""


class NotPositiveSemidefiniteError(WidthError, ValueError):
    """A Gram matrix has an eigenvalue below the PSD tolerance."""


class RankDeficiencyError(WidthError, ValueError):
    """More directions were requested than the Gram matrix supports."""


class ConvergenceError(WidthError, RuntimeError):
    """An iterative solver exhausted its budget."""


class InfeasibleGridError(WidthError, ValueError):
    """A sweep was requested on a grid too small for its N values."""


class DecayFitError(WidthError, ValueError):
    """The error sequence cannot be fitted by the decay models."""
