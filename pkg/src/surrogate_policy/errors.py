"""Exception hierarchy.

Every error carries the process exit code the command-line frontend uses
when the error aborts a run: 2 for configuration problems, 3 for data
problems and 4 for numerical failures.
"""


class SurrogatePolicyError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 4


class ConfigError(SurrogatePolicyError, ValueError):
    """Invalid configuration value or inconsistent options."""

    exit_code = 2


class UsageError(ConfigError):
    """An operation was called with incompatible arguments."""


class DataError(SurrogatePolicyError, ValueError):
    """Malformed or unusable input data."""

    exit_code = 3


class SchemaError(DataError):
    """Input columns or values violate the expected schema."""


class DegenerateLabelsError(DataError):
    """Binary labels contain a single class."""


class InsufficientArmError(DataError):
    """A training subsample lacks treated or control observations."""


class NumericalError(SurrogatePolicyError, ArithmeticError):
    """A numerical routine failed."""

    exit_code = 4


class DomainError(NumericalError, ValueError):
    """Argument outside the domain of a function (e.g. non-finite)."""


class DegenerateRiskError(NumericalError, ValueError):
    """Both conditional costs are zero, so the risk has no minimizer."""


class IllConditionedFitError(NumericalError):
    """Newton system could not be solved."""


class NonConvergenceError(NumericalError):
    """Iterative solver hit its iteration cap."""


class SingularDesignError(NumericalError):
    """Gram matrix fails the eigenvalue floor."""


class DegenerateVarianceError(NumericalError):
    """Estimated standard deviation is zero where it must be positive."""
