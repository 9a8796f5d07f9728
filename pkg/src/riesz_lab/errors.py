"""Exception hierarchy shared by every module."""

from __future__ import annotations

from typing import Any


class RieszLabError(Exception):
    """Base class for all library errors."""


class UnsupportedDesign(RieszLabError):
    """The design cannot serve the requested operation (e.g. enumerating a continuous law)."""


class DimensionTooLarge(RieszLabError):
    """Enumeration would exceed the configured support cap."""


class NoExactRoute(RieszLabError):
    """Exact moments were requested but neither enumeration nor a closed form applies."""


class InexactMoments(RieszLabError):
    """A Monte Carlo provider was handed to an operation that needs exact moments."""


class IndexOutOfRange(RieszLabError, IndexError):
    pass


class LengthMismatch(RieszLabError, ValueError):
    pass


class NonDifferentiable(RieszLabError):
    """Derivative functional on a basis without derivatives and no finite-difference fallback."""


class DependenceUnknown(RieszLabError):
    """The design declares no coordinate-independence structure."""


class InvalidAlpha(RieszLabError, ValueError):
    pass


class InvalidConjugatePair(RieszLabError, ValueError):
    pass


class ConfigInvalid(RieszLabError, ValueError):
    pass


class PositivityViolated(RieszLabError):
    """Raised when a representor is requested for a functional that fails positivity.

    ``report`` carries the failing :class:`~riesz_lab.positivity.PositivityReport`.
    """

    def __init__(self, message: str, report: Any = None, unit: int | None = None) -> None:
        super().__init__(message)
        self.report = report
        self.unit = unit
