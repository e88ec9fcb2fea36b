"""
Core data model, errors, events and the analysis pipeline.
"""

from chinese_voting.core.errors import (
    BadDisplayOrder,
    ConfigError,
    CVPError,
    DanglingVote,
    DegenerateX,
    DuplicateX,
    MalformedRecord,
    MissingDisplayOrder,
    MissingMetadata,
    NonContiguousTime,
    NonFinite,
    NumericalError,
    TooShort,
    Unidentifiable,
    UnknownItem,
    ValidationError,
    ZeroVariance,
)
from chinese_voting.core.events import Event, EventEmitter, EventType
from chinese_voting.core.trajectory import (
    ActionKind,
    ActionRecord,
    Dataset,
    FilterReport,
    ItemState,
    ItemTrajectory,
    ResponseMeta,
    StateTracker,
    UrnConfig,
    ingest_event_log,
    ingest_metadata,
    preprocess_filter,
    replay,
    replay_dataset,
    serialize_event_log,
    serialize_metadata,
)

__all__ = [
    "BadDisplayOrder",
    "ConfigError",
    "CVPError",
    "DanglingVote",
    "DegenerateX",
    "DuplicateX",
    "MalformedRecord",
    "MissingDisplayOrder",
    "MissingMetadata",
    "NonContiguousTime",
    "NonFinite",
    "NumericalError",
    "TooShort",
    "Unidentifiable",
    "UnknownItem",
    "ValidationError",
    "ZeroVariance",
    "Event",
    "EventEmitter",
    "EventType",
    "ActionKind",
    "ActionRecord",
    "Dataset",
    "FilterReport",
    "ItemState",
    "ItemTrajectory",
    "ResponseMeta",
    "StateTracker",
    "UrnConfig",
    "ingest_event_log",
    "ingest_metadata",
    "preprocess_filter",
    "replay",
    "replay_dataset",
    "serialize_event_log",
    "serialize_metadata",
]
