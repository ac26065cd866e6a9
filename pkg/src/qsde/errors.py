"""Exception types shared across the package and mapped to CLI exit codes."""


class QsdeError(Exception):
    """Base class for errors raised by this package."""

    category = "internal"


class ConfigError(QsdeError):
    """Malformed or inconsistent configuration input (CLI exit code 2)."""

    category = "config"


class NumericalAbort(QsdeError):
    """A computation produced nonfinite values or failed a residual gate
    (CLI exit code 4)."""

    category = "numeric"


class DilationError(NumericalAbort):
    """The Kolmogorov dilation could not be completed to tolerance."""
