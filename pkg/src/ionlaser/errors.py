"""Exception hierarchy shared by the solver, analysis and CLI layers."""


class IonLaserError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(IonLaserError, ValueError):
    """Operator or state dimensions are inconsistent or too small."""


class ConfigError(IonLaserError, ValueError):
    """A parameter record failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class ConvergenceError(IonLaserError):
    """Steady-state search did not reach its residual target."""

    def __init__(self, message, residual=float("nan")):
        self.residual = residual
        super().__init__(f"{message} (residual={residual:.3e})")


class AmbiguityError(IonLaserError):
    """The Liouvillian appears to have more than one steady state."""


class StiffnessError(IonLaserError):
    """Time integration failed even with the fixed-stride fallback."""


class StateValidationError(IonLaserError):
    """A density matrix violates positivity beyond the clipping tolerance."""


class DegenerateFitError(IonLaserError, ValueError):
    """Poisson fit requested for a distribution with (near) zero mean."""


class UndefinedCorrelationError(IonLaserError, ValueError):
    """g2 requested for a state whose mean phonon number is below the floor."""


class InsufficientDataError(IonLaserError, ValueError):
    """Too few usable points for threshold extraction."""


class TruncationWarning(UserWarning):
    """A displacement reaches beyond the support of the Fock cutoff."""


class ProtocolWarning(UserWarning):
    """Measurement settings outside the two-angle readout protocol."""


class AliasingWarning(UserWarning):
    """The α-grid is too coarse for the requested reconstruction window."""
