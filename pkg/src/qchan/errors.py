"""Exception types shared across the package."""


class QChanError(Exception):
    """Base class for package-specific errors."""


class ShapeError(QChanError, ValueError):
    """Matrix or vector dimensions do not match the declared layout."""


class NotPSDError(QChanError, ValueError):
    """A matrix required to be positive semidefinite has a negative
    eigenvalue beyond tolerance."""


class SingularMatrixError(QChanError, ValueError):
    """A matrix required to be invertible is singular at the working
    tolerance."""


class NotAChannelError(QChanError, ValueError):
    """Input data does not describe a completely positive trace-preserving
    map, even after the allowed repair."""


class NumericalFailureError(QChanError, RuntimeError):
    """An eigensolver did not converge or an internal cross-check between
    two independent computations failed."""


class InvalidWitnessError(QChanError, ValueError):
    """A perturbation passed to convex_split violates its required
    structure (block traces, range containment, or two-sidedness)."""


class PreconditionError(QChanError, ValueError):
    """Operation called on a channel outside its supported dimensions or
    Choi rank."""
