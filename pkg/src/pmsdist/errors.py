"""Exception hierarchy shared across the package."""


class PmsdistError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(PmsdistError, ValueError):
    """Raised when inputs violate a documented precondition or invariant."""


class DegenerateSampleError(PmsdistError):
    """Raised when sigma_hat == 0 (exact fit), a probability-zero event.

    Operations that require a positive residual scale signal this instead of
    silently dividing by zero.
    """


class DensityUndefinedError(PmsdistError):
    """Raised when the limit density does not exist for the requested target.

    The density of the limiting law exists only when the effective order is
    positive and the leading block of the target matrix has full row rank.
    """


class ExperimentRefusal(PmsdistError):
    """Raised when an experiment's hypothesis fails on the supplied fixture.

    Experiments refuse to run (rather than emit vacuous passes) when the
    structural assumption they are designed to exhibit does not hold.
    """
