"""Exception types raised across pcbr."""

from __future__ import annotations


class ParameterError(ValueError):
    """An input parameter is outside its admissible range."""


class FieldMismatchError(ValueError):
    """Two field elements live in different prime fields."""


class PlanMismatchError(ValueError):
    """A query plan does not fit the message store it is evaluated against."""


class ConstructionError(RuntimeError):
    """A query plan could not be built consistently."""


class DecodingError(RuntimeError):
    """The answers do not determine every demand subpacket."""


class InvariantError(AssertionError):
    """A closed-form identity between bounds, counts or rates failed to hold."""


class PipelineError(RuntimeError):
    """A stage of the retrieval round trip failed."""

    def __init__(self, stage: str, cause: str) -> None:
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
