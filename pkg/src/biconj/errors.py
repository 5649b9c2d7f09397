"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A constructor or operation argument violates its contract.

    ``field`` names the offending argument when known, so messages can be
    surfaced verbatim by the CLI config validator.
    """

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class PropernessError(ValidationError):
    """A sampled function has no finite value (properness violated)."""


class ResolutionError(ValidationError):
    """A grid is too coarse for the requested construction."""


class HypothesisFailure(RuntimeError):
    """A mathematical hypothesis required by a verification step fails.

    Raised when curvature is not positive at the anchor, when no quadratic
    lower-bound radius can be certified, or when a check is invoked outside
    its stated |t| window.
    """


class TruncationError(HypothesisFailure):
    """A maximizer landed on the grid boundary, so the reported value is
    contaminated by domain truncation rather than genuine structure."""
