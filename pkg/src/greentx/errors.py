"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is inconsistent or out of range."""


class FeasibilityError(ValueError):
    """An action is not allowed in the given state."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach the requested tolerance."""


class InitializationError(RuntimeError):
    """Offline value initialization produced a degenerate start table."""


class TableFormatError(ValueError):
    """A stored table file does not match the expected layout or config."""
