"""Exception hierarchy shared across the package."""


class BcmarError(Exception):
    """Base class for all errors raised by this package."""


class TableValidationError(BcmarError):
    """A margin table violates a structural invariant."""


class NegativeCountError(TableValidationError):
    """A cell, margin, or pattern count is negative."""


class ZeroTotalError(TableValidationError):
    """The table holds no observations at all."""


class DimensionMismatchError(TableValidationError):
    """Declared dimensions disagree with the stored blocks."""


class InvalidProbabilityError(BcmarError):
    """A probability vector or matrix is off the simplex or outside [0, 1]."""


class DegenerateLikelihoodError(BcmarError):
    """A strictly positive count multiplies log(0); the loglikelihood is -inf."""


class UndefinedConditionalError(BcmarError):
    """A closed-form conditional is 0/0: some row has margin-only cases but no
    complete cases, so the factored estimate does not exist."""


class SingularInformationError(BcmarError):
    """The observed information matrix is numerically singular."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class NotNestedError(BcmarError):
    """The model pair handed to the likelihood-ratio test is not nested."""


class BootstrapFailureError(BcmarError):
    """Too many bootstrap replicates failed to produce a fit."""
