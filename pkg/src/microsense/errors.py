"""Exception hierarchy shared by all modules."""


class MicrosenseError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MicrosenseError, ValueError):
    """Argument outside the mathematical or physical domain of an operation."""


class RangeError(DomainError):
    """Argument outside a tabulated or supported range (no extrapolation)."""


class NotFoundError(MicrosenseError, KeyError):
    """Named entity (e.g. a material) is not known."""

    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class SingularityError(DomainError):
    """Expression denominator is numerically zero."""


class ProximityError(DomainError):
    """Evaluation point lies inside the exclusion radius of an electrode edge."""

    def __init__(self, message, distance):
        super().__init__(message)
        self.distance = distance


class EmptyMapError(DomainError):
    """Every cell of a requested field map is excluded."""


class UndefinedMetricsError(DomainError):
    """Hotspot metrics requested on a map with no finite samples."""


class SampleRateError(DomainError):
    """Trace sample rate incompatible with the receiver configuration."""


class ConfigError(MicrosenseError):
    """Invalid run configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
