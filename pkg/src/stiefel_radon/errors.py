"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class StiefelRadonError(Exception):
    """Base class for all errors raised by this package."""


class RankDeficient(StiefelRadonError):
    pass


class NotPositiveDefinite(StiefelRadonError):
    pass


class InadmissibleParameters(StiefelRadonError):
    """Raised when integer parameters violate the admissibility conditions.

    The message names the violated inequality.
    """


class OutOfConvergenceRegion(StiefelRadonError):
    pass


class PoleAtLambda(StiefelRadonError):
    def __init__(self, message: str, order: int = 1):
        super().__init__(message)
        self.order = order


class DegenerateCompletion(StiefelRadonError):
    pass


class NotRightInvariant(StiefelRadonError):
    pass


class TooLarge(StiefelRadonError):
    pass


class BackendDisagreement(StiefelRadonError):
    pass


class SingularKernelDerivative(StiefelRadonError):
    pass


class InvalidParams(StiefelRadonError):
    pass


class ConfigError(StiefelRadonError):
    pass


def require(condition: bool, text: str, exc: type[StiefelRadonError] = InadmissibleParameters) -> None:
    """Raise ``exc`` naming ``text`` when ``condition`` is false."""
    if not condition:
        raise exc(f"violated: {text}")
