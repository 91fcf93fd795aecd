"""Exception and warning classes shared across the package."""

from __future__ import annotations


class AffSurfError(Exception):
    """Base class for construction and evaluation failures."""


class DomainError(AffSurfError, ValueError):
    pass


class UnsupportedOrder(AffSurfError, ValueError):
    pass


class NotPositive(AffSurfError, ValueError):
    pass


class RangeError(AffSurfError, ValueError):
    pass


class ConvergenceError(AffSurfError, RuntimeError):
    pass


class InvalidK(AffSurfError, ValueError):
    pass


class InfeasibleSlack(AffSurfError, ValueError):
    pass


class InvalidN(AffSurfError, ValueError):
    pass


class ZeroParameter(AffSurfError, ValueError):
    pass


class BallTooSmall(AffSurfError, ValueError):
    pass


class UpstreamInconsistent(AffSurfError, ValueError):
    pass


class TransversalityNotCertified(AffSurfError, RuntimeError):
    pass


class InvalidSpec(AffSurfError, ValueError):
    pass


class ParamIncompatible(AffSurfError, ValueError):
    pass


class HoleUnavailable(AffSurfError, ValueError):
    pass


class AtlasGap(AffSurfError, RuntimeError):
    pass


class StiffnessError(AffSurfError, RuntimeError):
    pass


class RangeUnknown(UserWarning):
    """Quadrature could not confirm divergence of an antiderivative at an endpoint."""
