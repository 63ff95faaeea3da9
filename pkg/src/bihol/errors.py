"""Exception hierarchy shared by every module."""


class BiholError(Exception):
    """Base class for all engine errors."""


class CapabilityError(BiholError):
    """A computation asked for more derivative orders than a jet carries."""


class JetDomainError(BiholError, ValueError):
    """Division by zero-constant jet, log/sqrt of a non-positive jet, ..."""


class ExpressionError(BiholError, ValueError):
    """Malformed expression text or an unknown symbol."""

    def __init__(self, message, text=None, position=None):
        self.text = text
        self.position = position
        if text is not None and position is not None:
            message = f"{message} at position {position}: {text!r}"
        super().__init__(message)


class DomainError(BiholError, ValueError):
    """Point outside the chart's domain predicate."""


class DegenerateMetricError(BiholError, ValueError):
    """Metric not positive definite at the requested point."""


class UnsupportedDimensionError(BiholError, ValueError):
    pass


class PreconditionError(BiholError):
    """A checker's hypothesis does not hold; distinct from a failed verdict.

    ``residual_name`` names the hypothesis residual that was too large.
    """

    def __init__(self, message, residual_name=None, value=None):
        self.residual_name = residual_name
        self.value = value
        super().__init__(message)


class NotHolomorphicError(PreconditionError):
    pass


class ConfigError(BiholError):
    """Configuration parse or validation failure."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
