"""Exception types shared across the package."""


class FeatAlignError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(FeatAlignError):
    """An input vector or matrix has the wrong shape for the model."""


class Unreachable(FeatAlignError):
    """A workspace target lies outside the arm's reach."""

    def __init__(self, message, target=None, waypoint_index=None):
        super().__init__(message)
        self.target = target
        self.waypoint_index = waypoint_index


class NoConvergence(FeatAlignError):
    """An iterative solver hit its iteration budget with residual above tolerance."""

    def __init__(self, message, residual=None, waypoint_index=None):
        super().__init__(message)
        self.residual = residual
        self.waypoint_index = waypoint_index


class UnknownObject(FeatAlignError):
    """Two environments do not describe the same set of object ids."""


class DegenerateFit(FeatAlignError):
    """Feature fitting received samples that carry no signal."""


class NonFiniteValue(FeatAlignError):
    """A cost, likelihood, or weight became NaN or infinite."""


class ScenarioError(FeatAlignError):
    """A scenario or report document violates its schema.

    ``location`` is a dotted path into the document (e.g. ``features[0].width``).
    """

    def __init__(self, message, location=None):
        super().__init__(f"{location}: {message}" if location else message)
        self.location = location


class SessionError(FeatAlignError):
    """Illegal operation on a live correction session (wrong phase, unknown id)."""
