"""Exception hierarchy shared by every catbounds module."""


class CatboundsError(Exception):
    """Base class for all errors raised by catbounds."""


class ModelValidationError(CatboundsError, ValueError):
    """A rate specification is malformed or yields a negative intensity."""


class UnsupportedFamilyError(CatboundsError):
    """The operation is only defined for a different model family."""


class InvalidWeightsError(ModelValidationError):
    """Weight sequence is not strictly positive or has zero infimum."""


class BoundUndefinedError(CatboundsError):
    """A bound cannot be formed, e.g. a weighted series diverges."""


class NotExponentiallyErgodicError(BoundUndefinedError):
    """Period mean of the contraction rate is not positive."""


class QuadratureError(CatboundsError):
    """Numerical integration did not reach the requested tolerance."""


class SolverError(CatboundsError):
    """The ODE integrator failed (step underflow, negativity, ...)."""


class MajorantError(CatboundsError):
    """Thinning majorant was exceeded by the true event rate."""
