"""Exception hierarchy shared by the engines."""


class PertevolError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PertevolError, ValueError):
    """Operands have incompatible shapes."""


class HermiticityError(PertevolError, ValueError):
    """An operator required to be Hermitian is not."""

    def __init__(self, defect, message=None):
        self.defect = float(defect)
        super().__init__(message or f"operator is not Hermitian (defect {self.defect:.3e})")


class BaseMismatchError(PertevolError, ValueError):
    """Trigonometric polynomials declared over different base frequencies."""


class ClosureError(PertevolError, ValueError):
    """Operation would leave the trigonometric-polynomial algebra."""


class RepresentationOverflow(PertevolError, ValueError):
    """Polynomial-in-time degree exceeds the supported maximum."""


class SmallDivisorError(PertevolError, ArithmeticError):
    """An energy denominator is too close to the clustering tolerance."""


class OrderError(PertevolError, ValueError):
    """Requested perturbative order is outside the supported range."""


class GaugeError(PertevolError, ValueError):
    """A gauge operator violates its constraints."""


class IntegrationError(PertevolError, RuntimeError):
    """The reference integrator failed (e.g. step-size underflow)."""


class ConfigError(PertevolError, ValueError):
    """Invalid scenario configuration."""
