"""Shared exception types.

Plain ValueError is used for ordinary domain errors (bad numeric input);
the classes here mark the cases the CLI maps to distinct exit codes.
"""


class ConfigurationError(ValueError):
    """A name or configuration value is outside the supported set."""


class UnsupportedOperationError(RuntimeError):
    """The requested operation is not available for the given object,
    e.g. exact cell propagation for a map without piecewise-linear data."""


class ResourceLimitError(ValueError):
    """A request exceeds a hard resource cap (e.g. dense-oracle dimension)."""
