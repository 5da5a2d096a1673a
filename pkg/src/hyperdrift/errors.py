"""Exception types raised across the package."""


class HyperdriftError(Exception):
    """Base class for all package errors."""


class ShapeError(HyperdriftError, ValueError):
    """Operand dimensions do not match."""


class ContractError(HyperdriftError, ValueError):
    """A precondition of an operation was violated."""


class DomainError(HyperdriftError, ValueError):
    """Argument outside the mathematical domain of a function."""


class TrainingError(HyperdriftError, RuntimeError):
    """Training cannot proceed (e.g. no confident pseudo-labels)."""


class UndefinedMetricError(HyperdriftError, ValueError):
    """Metric is undefined for the given labels."""


class DataError(HyperdriftError, ValueError):
    """Malformed input data."""


class ConfigError(HyperdriftError, ValueError):
    """Invalid configuration key or value."""
