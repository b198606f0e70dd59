"""Exception types shared across the package."""


class FlareVtError(Exception):
    """Base class for all flarevt errors."""


class ParseError(FlareVtError, ValueError):
    """Malformed input file content."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class OrderingError(ParseError):
    """Timestamps not strictly increasing."""


class EmptyInputError(FlareVtError, ValueError):
    """No usable data rows in the input."""


class DomainError(FlareVtError, ValueError):
    """Argument outside its valid domain."""


class InsufficientDataError(FlareVtError, ValueError):
    """Too few observations for the requested operation."""


class ZeroVarianceError(FlareVtError, ValueError):
    """Constant series where nonzero variance is required."""


class ConvergenceError(FlareVtError, RuntimeError):
    """Optimizer failed to converge.

    The ``diagnostics`` attribute carries the final optimizer state.
    """

    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class CiUnavailableError(FlareVtError, RuntimeError):
    """Confidence interval cannot be computed (no usable covariance)."""


class InfiniteReturnError(FlareVtError, ValueError):
    """Requested level lies beyond the finite upper endpoint of the tail."""


class PipelineStageError(FlareVtError, RuntimeError):
    """A pipeline stage failed.  Carries the stage name and the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
