"""Exception hierarchy shared across the package.

Every error raised by the library derives from :class:`PolytermError`, so
callers (notably the CLI) can distinguish model/validation problems from
genuine runtime failures with a single ``except``.
"""


class PolytermError(Exception):
    """Base class for all library errors."""


class DegreeError(PolytermError):
    """A polynomial exceeds the degree bound its slot allows."""


class ParamError(PolytermError):
    """A family parameter is outside its admissible range."""


class ConstraintError(PolytermError):
    """A model spec fails the no-arbitrage coefficient constraints."""


class DomainError(PolytermError):
    """A state value lies outside the factor domain."""


class ThetaError(PolytermError):
    """A power exponent is not on the model's theta grid."""


class ConfigError(PolytermError):
    """An invalid simulation configuration."""


class CorrelationError(PolytermError):
    """The implied stock/factor correlation leaves [-1, 1]."""


class MissingStockError(PolytermError):
    """A stock-dependent estimator was given factor-only paths."""


class NonPositivePriceError(PolytermError):
    """A polynomial price is non-positive where a log is required."""


class OutOfBoundsError(PolytermError):
    """An option price violates its static no-arbitrage bounds."""


class DivergenceError(PolytermError):
    """A normalization integral fails to converge."""


class TruncationError(PolytermError):
    """A truncated quadrature tail cannot be bounded below tolerance."""


class OverflowRangeError(PolytermError):
    """A matrix exponential argument exceeds the representable range."""


class SchemaError(PolytermError):
    """A model file does not match the expected JSON schema."""
