"""Exception types shared across the package.

The split mirrors how failures are reported at the command line: configuration
problems, malformed input data, and estimation breakdowns are distinguishable
by exception class so the CLI can map them to distinct exit codes.
"""


class DomainError(ValueError):
    """An argument lies outside the physically meaningful domain."""


class DegenerateFitError(RuntimeError):
    """A fit cannot be performed or inverted (rank deficiency, zero slope)."""


class StreamOrderError(ValueError):
    """A time-tag stream violates the sorted-timestamp contract."""


class NoResonanceError(RuntimeError):
    """No interior reflectance minimum exists for the given layer stack."""


class ParseError(ValueError):
    """A data or config file is malformed; carries file context."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        if path:
            message = f"{path}:{line}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class ConfigError(ValueError):
    """Run configuration is missing keys or holds inconsistent values."""


class EstimationError(RuntimeError):
    """An estimation pipeline failed outright (for example every fit failed)."""
