"""Exception types raised across the toolkit."""


class BiphotonError(Exception):
    pass


class ZeroStateError(BiphotonError, ValueError):
    """All amplitudes vanish, so no state can be formed."""


class ShapeError(BiphotonError, ValueError):
    """Matrix has the wrong shape or fails the Hermiticity check."""


class DegenerateDataError(BiphotonError, ValueError):
    """Measurement data carries no information (zero trace, zero counts)."""


class FitError(BiphotonError, ValueError):
    """A least-squares fit is underdetermined."""
