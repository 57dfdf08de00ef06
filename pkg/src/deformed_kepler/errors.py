"""Exception types shared across the package."""


class DeformedKeplerError(Exception):
    """Base class for all package errors."""


class SingularOriginError(DeformedKeplerError, ValueError):
    """Raised when an evaluation lands on the metric singularity at r = 0."""


class DomainError(DeformedKeplerError, ValueError):
    """Raised for arguments outside an operation's domain."""


class DegenerateSampleError(DeformedKeplerError):
    """Raised when a sample set cannot exhibit full Jacobian rank."""


class ConvergenceError(DeformedKeplerError, RuntimeError):
    """Raised when a numerical procedure fails to converge."""


class CollisionError(DeformedKeplerError, RuntimeError):
    """Raised when a trajectory falls into the origin.

    ``time`` holds the integration time at which the halt radius was reached.
    """

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time
