"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid scenario or component configuration."""


class RealTimeViolation(ConfigError):
    """A schedule does not fit in the charging deadline (N_s * t_u <= T_c)."""


class PreconditionError(ValueError):
    """Inputs fall outside the region where a bound or model holds."""


class ModelError(ValueError):
    """Model parameters that would break the energy or utility model."""


class DimensionError(ValueError):
    """Array shapes that do not line up."""


class DegenerateGeometryError(ValueError):
    """Charger and sensor coincide, so the 1/d channel law is undefined."""


class DomainError(ValueError):
    """A value outside the domain a function is defined on."""
