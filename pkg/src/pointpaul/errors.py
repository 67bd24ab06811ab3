class TrapError(Exception):
    """Base class for errors raised by pointpaul."""


class NumericalFailure(TrapError):
    """A quadrature, fit or integration did not reach its tolerance."""


class NoTrapError(TrapError, ValueError):
    """The requested drive/geometry has no on-axis rf node."""


class EscapeError(NumericalFailure):
    """A particle left the allowed region during integration or minimization."""


class QuadratureAccuracyWarning(UserWarning):
    """Evaluation too close to the electrode plane for full quadrature accuracy."""
