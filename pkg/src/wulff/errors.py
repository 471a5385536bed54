"""Exception types raised across the package."""


class WulffError(Exception):
    """Base class for all package errors."""


class NonSmoothNorm(WulffError):
    pass


class UnsupportedDimension(WulffError):
    pass


class InadmissibleParams(WulffError, ValueError):
    """Problem parameters outside the range where the radial theory applies."""


class LambdaTooLarge(WulffError, ValueError):
    """The source intensity violates the smallness condition lambda < c_gamma * Lambda_gamma."""


class OutOfDomain(WulffError, ValueError):
    pass


class MeasureMismatch(WulffError, ValueError):
    pass


class DomainMismatch(WulffError, ValueError):
    pass


class SelfIntersecting(WulffError, ValueError):
    pass


class DegenerateDomain(WulffError, ValueError):
    pass


class NoConvergence(WulffError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ConfigError(WulffError, ValueError):
    pass
