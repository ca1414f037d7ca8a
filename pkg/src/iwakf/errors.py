"""Exception types shared across the package."""


class IwakfError(Exception):
    """Base class for all package errors."""


class UnstableFilter(IwakfError):
    """Coloring-filter denominator fails the Jury stability conditions."""


class PoleEvaluation(IwakfError):
    """Transfer function evaluated too close to a pole."""


class DimensionMismatch(IwakfError):
    """Matrix or vector shapes are inconsistent."""


class SingularInnovationCovariance(IwakfError):
    """Innovation covariance S is not invertible to tolerance."""


class NoConvergence(IwakfError):
    """Fixed-point iteration failed to reach the requested residual."""


class InsufficientData(IwakfError):
    """Not enough samples for the requested estimate."""


class RankDeficient(IwakfError):
    """An operator lost column rank where a pseudo-inverse is required."""


class UnstableClosedLoop(IwakfError):
    """Closed-loop filter dynamics have spectral radius >= 1."""
