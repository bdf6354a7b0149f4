"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes or sizes are inconsistent with the model."""


class DomainError(ValueError):
    """A scalar argument lies outside its mathematical domain."""


class CapacityError(ValueError):
    """A combinatorial guard was exceeded (problem too large to enumerate)."""


class InfeasibleDesignError(ValueError):
    """No operating point satisfies the sparsity design constraints."""


class DegenerateFrameError(ValueError):
    """Control overhead consumed the entire frame; no data time remains."""


class SaturationError(OverflowError):
    """A power-law exponent exceeded the overflow guard (cap 1024)."""


class ConfigError(ValueError):
    """A configuration file could not be parsed or validated."""
