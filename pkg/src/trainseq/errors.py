"""Exception types shared across the package."""


class TrainSeqError(Exception):
    """Base class for all trainseq errors."""


class InvalidArgumentError(TrainSeqError, ValueError):
    """An argument or configuration value violates a documented contract."""


class NumericFailureError(TrainSeqError, RuntimeError):
    """A numerical operation (factorization, solve) failed beyond recovery."""


class SingularModelError(NumericFailureError):
    """The model matrix is rank deficient for the requested estimator."""
