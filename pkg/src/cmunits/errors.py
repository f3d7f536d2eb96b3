"""Exception types raised across the package."""


class NotADiscriminant(ValueError):
    """The integer is not a negative integer congruent to 0 or 1 mod 4."""


class PreconditionError(ValueError):
    """An operation was called outside its documented domain."""


class PrecisionExhausted(ArithmeticError):
    """The requested error bound could not be met at the working precision."""


class Undecidable(ArithmeticError):
    """A certified comparison could not be separated before the precision cap."""


class ToleranceNotMet(ArithmeticError):
    """Adaptive quadrature ran out of cells before reaching the tolerance."""


class PreconditionNotUnit(PreconditionError):
    """The singular modulus (or its shift) does not have norm of modulus 1."""


class EtaCollision(PreconditionError):
    """A CM point coincides with the base point of a distance diagnostic."""
