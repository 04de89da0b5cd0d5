"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: validation problems exit with 2,
numerical failures with 3, capacity overruns with 4.
"""


class CutoffError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(CutoffError, ValueError):
    """Bad input: wrong shapes, domains, flags, or unsupported requests."""


class DimensionError(ValidationError):
    """Matrix/vector shapes are inconsistent."""


class DomainError(ValidationError):
    """A scalar argument lies outside its admissible range."""


class SizeError(ValidationError):
    """Two collections that must have equal sizes do not."""


class NotPSDError(ValidationError):
    """A matrix required to be positive semidefinite is not."""


class StabilityError(ValidationError):
    """The drift matrix is not positively stable (some Re(lambda) <= margin)."""


class GenericityError(ValidationError):
    """An operation requires pairwise-distinct eigenvalues and the matrix has none."""


class UnsupportedLawError(ValidationError):
    """The noise law does not support the requested operation."""


class UnsupportedBranchError(ValidationError):
    """Parameters fall outside the analytic branch that is implemented."""


class OutOfScopeError(ValidationError):
    """The request is explicitly out of scope (e.g. order p < 1 bounds)."""


class DegenerateInitialStateError(ValidationError):
    """The initial state coincides with the stationary mean, so the lower-bound
    route of the dichotomy degenerates."""


class NumericalFailure(CutoffError, RuntimeError):
    """An algorithm did not converge or produced unusable output.

    ``payload`` may carry partial results (e.g. a partial spectrum).
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload


class BlowUpError(NumericalFailure):
    """A simulated state exceeded the blow-up guard; reports the step index."""

    def __init__(self, message, step=None):
        super().__init__(message, payload=step)
        self.step = step


class CapacityError(CutoffError):
    """The request exceeds a hard size cap of the implementation."""
