"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised for invalid user-supplied parameters or config files."""


class SynthesisError(RuntimeError):
    """Raised when controller synthesis fails or yields an unstable closed loop."""


class OptimizationError(RuntimeError):
    """Raised when a numeric fixed point or parameter search does not converge."""


class InvariantViolation(AssertionError):
    """Internal consistency failure; aborts the current run."""
