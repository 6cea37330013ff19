"""Exception types raised across the package."""


class QpufError(Exception):
    """Base class for all package errors."""


class ContractError(QpufError, ValueError):
    """An argument violates an operation's precondition (shape, basis, range)."""


class PreconditionError(ContractError):
    """A closed-form bound was evaluated outside its domain of validity."""


class ConfigError(QpufError, ValueError):
    """An experiment or CLI configuration is inconsistent."""


class ScaleError(QpufError, ValueError):
    """A brute-force oracle was asked to run beyond its supported size."""


class NumericalError(QpufError, ArithmeticError):
    """A numerical routine failed its own post-condition check."""
