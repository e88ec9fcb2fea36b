"""
Exception hierarchy for the Chinese Voting Process library.

Validation errors describe bad input data or configuration; numerical errors
describe optimization or statistics that cannot produce a finite answer. The
CLI maps the two families to different exit codes.
"""

from typing import Optional


class CVPError(Exception):
    """Base class for every error raised by this library."""


class ValidationError(CVPError, ValueError):
    """
    Input data or configuration violates a documented precondition.

    Attributes:
        item_id: Item the problem was found in, if known
        t: 1-based event index within the item, if known
        line: 1-based source line number, if raised while reading a file
    """

    def __init__(
        self,
        message: str,
        item_id: Optional[str] = None,
        t: Optional[int] = None,
        line: Optional[int] = None,
    ):
        self.item_id = item_id
        self.t = t
        self.line = line
        self.reason = message
        super().__init__(self._format(message))

    def _format(self, message: str) -> str:
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.item_id is not None:
            where.append(f"item {self.item_id!r}")
        if self.t is not None:
            where.append(f"t={self.t}")
        if not where:
            return message
        return f"{' '.join(where)}: {message}"


class MalformedRecord(ValidationError):
    """A record has a missing field or a field of the wrong type."""


class NonContiguousTime(ValidationError):
    """Event indices within an item have gaps or duplicates."""


class DanglingVote(ValidationError):
    """A vote references a response that has not been written yet."""


class BadDisplayOrder(ValidationError):
    """A display order is not a permutation of the existing responses."""


class MissingDisplayOrder(ValidationError):
    """An event needed for selection modeling carries no display order."""


class MissingMetadata(ValidationError):
    """Per-response metadata required by an analysis is absent."""


class UnknownItem(ValidationError):
    """Parameters were requested for an item they were not fitted on."""


class ConfigError(ValidationError):
    """A configuration value is outside its documented range."""


class NumericalError(CVPError, ArithmeticError):
    """A numerical procedure could not produce a finite, meaningful result."""


class NonFinite(NumericalError):
    """An objective or gradient evaluated to NaN or infinity."""


class Unidentifiable(NumericalError):
    """The data carries no information about the requested parameter."""


class TooShort(NumericalError):
    """A sequence is too short for the requested estimate."""


class ZeroVariance(NumericalError):
    """Standardization was requested for constant input."""


class DegenerateX(NumericalError):
    """Regression was requested with all x values equal."""


class DuplicateX(NumericalError):
    """Consecutive points share an x value, so a segment slope is undefined."""
