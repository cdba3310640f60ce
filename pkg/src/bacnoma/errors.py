"""Exception types raised across the package."""


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class DataError(ValueError):
    """Input data violates a structural requirement (e.g. a non-PSD covariance)."""


class DegenerateChannelError(ValueError):
    """Channel realization is rank deficient; the trial should be redrawn."""


class InfeasibleTargetError(ValueError):
    """A downlink target rate cannot be met even with all reflections switched off."""


class UnsupportedOverloadError(ValueError):
    """QR-based detection requested with more devices than antennas."""


class OracleError(ArithmeticError):
    """Objective or gradient oracle produced a non-finite value."""


class InfeasibleRegionError(ValueError):
    """Feasible region is empty (negative interference budget)."""


class ConfigError(ValueError):
    """Malformed experiment configuration."""
