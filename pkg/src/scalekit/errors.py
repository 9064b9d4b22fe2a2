"""Exception hierarchy shared by all scalekit modules."""


class ScalekitError(Exception):
    """Base class for all scalekit errors."""


class DomainError(ScalekitError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class SizeError(ScalekitError):
    """Instance too large for the exact-search regime of the operation."""


class BracketError(ScalekitError):
    """Bisection bracket shows the same trend at both ends after widening."""


class DepthError(ScalekitError):
    """Sequence too shallow for the requested tail or block depth."""


class ResourceError(ScalekitError):
    """Request exceeds a configured memory or work budget."""


class GridError(ScalekitError, ValueError):
    """A sampling grid is too coarse or malformed for the operation."""
