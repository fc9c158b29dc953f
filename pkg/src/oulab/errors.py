"""Exception hierarchy shared across the package."""


class OULabError(Exception):
    """Base class for all errors raised by oulab."""


class DimensionMismatchError(OULabError, ValueError):
    """Shapes of the supplied operands are inconsistent."""


class RangeCapError(OULabError, OverflowError):
    """A matrix exponential argument exceeds the configured norm cap."""


class StabilityError(OULabError, ValueError):
    """The drift matrix is not Hurwitz; names the offending eigenvalue."""

    def __init__(self, eigenvalue):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"drift matrix is not Hurwitz: eigenvalue {eigenvalue} has "
            f"real part {eigenvalue.real:.6g} >= 0 (tolerance 1e-10)"
        )


class DomainError(OULabError, ValueError):
    """An argument lies outside the operation's domain (e.g. negative time)."""


class SymmetryError(OULabError, ValueError):
    """A matrix expected to be symmetric/PSD violates the tolerance."""


class DegenerateCovarianceError(OULabError, ValueError):
    """A density or inverse was requested for a degenerate covariance."""


class CapabilityError(OULabError, NotImplementedError):
    """The request exceeds a documented capability limit (e.g. quadrature dim)."""


class InapplicableError(OULabError, ValueError):
    """A witness construction does not apply to the supplied (t, s) pair."""


class ConfigError(OULabError, ValueError):
    """An experiment configuration failed validation."""
