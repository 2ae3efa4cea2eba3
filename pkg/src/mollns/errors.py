class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


class SchemaError(ConfigError):
    """Config file written for a different schema version."""


class BlowUpError(RuntimeError):
    """A run left the admissible range (non-finite or above the sup-norm ceiling)."""

    def __init__(self, message: str, t: float, value: float, config: dict | None = None):
        super().__init__(message)
        self.t = t
        self.value = value
        self.config = config


class DegenerateWindowError(ValueError):
    """E(s) == E(t): the mean-value factor is undefined on this window."""


class NotConvergedError(RuntimeError):
    """The inner m-limit of an extrapolation has not saturated."""
