"""
Event-log data model, ingestion and deterministic replay.

A community's history is a log of actions on items (products, questions).
Each action either writes a new response or votes on an existing one, and
records the display order users saw immediately before it. Replaying the log
turns it into per-step feature states (vote counts, Pólya urn ratios,
relative lengths, display ranks) that every model in the library consumes.

Example:
    with open("events.jsonl", "rb") as f:
        dataset = ingest_event_log(f, community_id="stats")

    urn = UrnConfig(x0=1.0, y0=1.0, w=1.0)
    states = replay(dataset.items[0], urn)
    print(states[-1].ratio_pos)
"""

import io
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import IO, Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from chinese_voting.core.errors import (
    BadDisplayOrder,
    ConfigError,
    DanglingVote,
    MalformedRecord,
    NonContiguousTime,
    ValidationError,
)

logger = logging.getLogger(__name__)

LineSource = Union[bytes, str, IO[bytes], IO[str], Iterable[Union[bytes, str]]]


class ActionKind(str, Enum):
    """Kinds of events in a trajectory."""
    WRITE = "write"
    VOTE = "vote"


GAP_ACTION = "gap"


@dataclass(frozen=True)
class UrnConfig:
    """
    Pólya urn pseudo-votes and reinforcement.

    Attributes:
        x0: Pseudo-positive votes every response starts with
        y0: Pseudo-negative votes every response starts with
        w: Extra copies returned to the urn per observed vote
    """
    x0: float = 1.0
    y0: float = 1.0
    w: float = 1.0

    def __post_init__(self):
        for name in ("x0", "y0", "w"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise ConfigError(f"urn {name} must be a positive real, got {value}")

    @classmethod
    def parse(cls, text: str) -> "UrnConfig":
        """Parse an ``x0,y0,w`` triple such as ``"1,1,1"``."""
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise ConfigError(f"urn must be given as x0,y0,w, got {text!r}")
        try:
            x0, y0, w = (float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"urn values must be numbers, got {text!r}") from None
        return cls(x0=x0, y0=y0, w=w)

    @property
    def prior_ratio(self) -> float:
        """Positive ratio of a response that has no votes yet."""
        return self.x0 / (self.x0 + self.y0)

    def to_dict(self) -> Dict[str, float]:
        return {"x0": self.x0, "y0": self.y0, "w": self.w}


@dataclass(frozen=True)
class ActionRecord:
    """
    One observed action on an item.

    Attributes:
        item_id: Item the action belongs to
        t: 1-based event index within the item
        kind: Write or vote
        length: Character length of a written response (writes only)
        response: 0-based index of the voted response (votes only)
        polarity: 1 for a positive vote, 0 for a negative one (votes only)
        display_order: Response indices best-first as displayed right before
            this event, or None when the log did not record it
        seq: Community-global clock value used to order events across items
    """
    item_id: str
    t: int
    kind: ActionKind
    length: Optional[int] = None
    response: Optional[int] = None
    polarity: Optional[int] = None
    display_order: Optional[Tuple[int, ...]] = None
    seq: int = 0

    @property
    def is_write(self) -> bool:
        return self.kind == ActionKind.WRITE

    @property
    def is_vote(self) -> bool:
        return self.kind == ActionKind.VOTE

    def to_record(self, include_seq: bool = True) -> Dict[str, Any]:
        """Canonical key/value form used by the event-log file."""
        record: Dict[str, Any] = {"item": self.item_id, "t": self.t, "action": self.kind.value}
        if self.is_write:
            record["length"] = self.length
        else:
            record["response"] = self.response
            record["polarity"] = self.polarity
        if self.display_order is not None:
            record["order"] = list(self.display_order)
        if include_seq:
            record["seq"] = self.seq
        return record


@dataclass(frozen=True)
class ItemTrajectory:
    """
    The complete, ordered history of one item.

    Attributes:
        item_id: Item identifier
        events: Events ordered by t (t = 1..T)
        gaps: Fragment boundaries, mapping the t of the first event after a
            gap to the number of votes missing there
    """
    item_id: str
    events: Tuple[ActionRecord, ...]
    gaps: Dict[int, int] = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.events)

    @property
    def J_final(self) -> int:
        return sum(1 for e in self.events if e.is_write)

    @property
    def n_votes(self) -> int:
        return self.T - self.J_final

    @property
    def is_fragmented(self) -> bool:
        return bool(self.gaps)

    def write_times(self) -> List[int]:
        """Event index at which each response was written."""
        return [e.t for e in self.events if e.is_write]


@dataclass(frozen=True)
class ResponseMeta:
    """
    Per-response side information used by the quality analysis.

    Attributes:
        comment_count: Number of comments attached to the response
        avg_sentiment: Mean comment sentiment in [-5, 5], or None
        group_tag: Sub-community label used for grouped coefficients
    """
    comment_count: int = 0
    avg_sentiment: Optional[float] = None
    group_tag: Optional[str] = None


@dataclass
class Dataset:
    """
    All trajectories of one community.

    Attributes:
        community_id: Community identifier
        items: Item trajectories in order of first appearance in the log
        metadata: Optional per-response metadata keyed by (item_id, response)
        explicit_seq: Whether the source log carried explicit ``seq`` values
    """
    community_id: str
    items: List[ItemTrajectory]
    metadata: Dict[Tuple[str, int], ResponseMeta] = field(default_factory=dict)
    explicit_seq: bool = False

    def __post_init__(self):
        seen = set()
        for item in self.items:
            if item.item_id in seen:
                raise ValidationError("duplicate item id", item_id=item.item_id)
            seen.add(item.item_id)

    @property
    def m(self) -> int:
        return len(self.items)

    @property
    def n_votes(self) -> int:
        return sum(item.n_votes for item in self.items)

    @property
    def n_responses(self) -> int:
        return sum(item.J_final for item in self.items)

    def item(self, item_id: str) -> ItemTrajectory:
        for item in self.items:
            if item.item_id == item_id:
                return item
        raise KeyError(item_id)

    def with_items(self, items: Sequence[ItemTrajectory]) -> "Dataset":
        """Copy of this dataset restricted to (or reordered as) ``items``."""
        keep = {item.item_id for item in items}
        metadata = {k: v for k, v in self.metadata.items() if k[0] in keep}
        return replace(self, items=list(items), metadata=metadata)

    def group_of(self, item: ItemTrajectory) -> Optional[str]:
        """Group tag of an item: the tag of its first tagged response."""
        for j in range(item.J_final):
            meta = self.metadata.get((item.item_id, j))
            if meta is not None and meta.group_tag:
                return meta.group_tag
        return None

    def summary(self) -> Dict[str, Any]:
        """Summary counts, as printed by ``validate``."""
        return {
            "community_id": self.community_id,
            "items": self.m,
            "events": sum(item.T for item in self.items),
            "responses": self.n_responses,
            "votes": self.n_votes,
            "fragmented_items": sum(1 for item in self.items if item.is_fragmented),
            "metadata_rows": len(self.metadata),
        }


@dataclass(frozen=True)
class ItemState:
    """
    Replayed state of an item immediately before event ``t``.

    All arrays are read-only and indexed by response (write order).

    Attributes:
        t: Index of the event this state precedes
        pos_votes: Positive vote counts n+
        neg_votes: Negative vote counts n-
        urn_x: Urn positive mass x = x0 + w * n+
        urn_y: Urn negative mass y = y0 + w * n-
        ratio_pos: r = x / (x + y)
        ratio_neg: s = 1 - r
        length: Response lengths in characters
        rel_length: u = length / mean_length
        display_rank: 1-based display ranks, or None when not observed
        last_active: Event index of each response's write or latest vote
        mean_length: Mean length over existing responses (0 when J = 0)
    """
    t: int
    pos_votes: np.ndarray
    neg_votes: np.ndarray
    urn_x: np.ndarray
    urn_y: np.ndarray
    ratio_pos: np.ndarray
    ratio_neg: np.ndarray
    length: np.ndarray
    rel_length: np.ndarray
    display_rank: Optional[np.ndarray]
    last_active: np.ndarray
    mean_length: float

    @property
    def J(self) -> int:
        return int(self.pos_votes.shape[0])

    @property
    def total_votes(self) -> np.ndarray:
        return self.pos_votes + self.neg_votes


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


class StateTracker:
    """
    Mutable accumulator that advances an item one event at a time.

    Used by ``replay`` for observed data and by the simulator, which must
    rank responses from the same state it samples from.
    """

    def __init__(self, urn: UrnConfig):
        self.urn = urn
        self._pos: List[int] = []
        self._neg: List[int] = []
        self._length: List[int] = []
        self._last_active: List[int] = []
        self._applied = 0

    @property
    def J(self) -> int:
        return len(self._length)

    @property
    def next_t(self) -> int:
        return self._applied + 1

    def add_response(self, length: int):
        self._applied += 1
        self._pos.append(0)
        self._neg.append(0)
        self._length.append(int(length))
        self._last_active.append(self._applied)

    def add_vote(self, response: int, polarity: int):
        self._applied += 1
        if polarity:
            self._pos[response] += 1
        else:
            self._neg[response] += 1
        self._last_active[response] = self._applied

    def apply(self, event: ActionRecord):
        if event.is_write:
            self.add_response(event.length)
        else:
            self.add_vote(event.response, event.polarity)

    def snapshot(self, display_order: Optional[Sequence[int]] = None) -> ItemState:
        """Freeze the current counters into an ItemState."""
        urn = self.urn
        pos = np.asarray(self._pos, dtype=np.int64)
        neg = np.asarray(self._neg, dtype=np.int64)
        x = urn.x0 + urn.w * pos
        y = urn.y0 + urn.w * neg
        r = x / (x + y)
        s = 1.0 - r
        length = np.asarray(self._length, dtype=np.float64)
        mean_length = float(length.mean()) if length.size else 0.0
        rel_length = length / mean_length if length.size else np.zeros(0)

        ranks: Optional[np.ndarray] = None
        if display_order is not None:
            ranks = np.empty(len(display_order), dtype=np.int64)
            ranks[np.asarray(display_order, dtype=np.int64)] = np.arange(1, len(display_order) + 1)
            ranks = _frozen(ranks)

        return ItemState(
            t=self.next_t,
            pos_votes=_frozen(pos),
            neg_votes=_frozen(neg),
            urn_x=_frozen(x),
            urn_y=_frozen(y),
            ratio_pos=_frozen(r),
            ratio_neg=_frozen(s),
            length=_frozen(length),
            rel_length=_frozen(rel_length),
            display_rank=ranks,
            last_active=_frozen(np.asarray(self._last_active, dtype=np.int64)),
            mean_length=mean_length,
        )


def replay(traj: ItemTrajectory, urn: UrnConfig) -> List[ItemState]:
    """
    Replay a trajectory into per-step states.

    Args:
        traj: A validated trajectory
        urn: Urn pseudo-votes and reinforcement

    Returns:
        One state per event; element ``t - 1`` is the state before event ``t``
    """
    tracker = StateTracker(urn)
    states: List[ItemState] = []
    for event in traj.events:
        states.append(tracker.snapshot(event.display_order))
        tracker.apply(event)
    return states


def replay_dataset(ds: Dataset, urn: UrnConfig, threads: int = 1) -> List[List[ItemState]]:
    """
    Replay every item of a dataset, optionally on a thread pool.

    Results are returned in item order regardless of ``threads``.
    """
    if threads <= 1 or ds.m <= 1:
        return [replay(item, urn) for item in ds.items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda item: replay(item, urn), ds.items))


# --- Ingestion -------------------------------------------------------------


def _iter_lines(stream: LineSource) -> Iterable[Tuple[int, str]]:
    if isinstance(stream, (bytes, str)):
        stream = stream.splitlines()
    for number, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode("utf-8")
            except UnicodeDecodeError as e:
                raise MalformedRecord(f"invalid UTF-8: {e}", line=number) from None
        yield number, raw


def _require_int(record: Dict[str, Any], key: str, line: int, item_id: Optional[str] = None,
                 t: Optional[int] = None) -> int:
    value = record.get(key)
    if isinstance(value, bool) or not isinstance(value, int):
        raise MalformedRecord(f"field {key!r} must be an integer, got {value!r}",
                              item_id=item_id, t=t, line=line)
    return value


def _parse_order(
    record: Dict[str, Any], line: int, item_id: str, t: int
) -> Optional[Tuple[int, ...]]:
    if "order" not in record or record["order"] is None:
        return None
    order = record["order"]
    if not isinstance(order, list) or any(
        isinstance(v, bool) or not isinstance(v, int) for v in order
    ):
        raise MalformedRecord(f"field 'order' must be a list of integers, got {order!r}",
                              item_id=item_id, t=t, line=line)
    return tuple(order)


@dataclass
class _RawItem:
    events: List[Tuple[int, ActionRecord]] = field(default_factory=list)
    gaps: List[Tuple[int, int, int]] = field(default_factory=list)


def _parse_record(number: int, text: str, position: int) -> Tuple[str, Any]:
    try:
        record = json.loads(text)
    except json.JSONDecodeError as e:
        raise MalformedRecord(f"not a JSON object: {e.msg}", line=number) from None
    if not isinstance(record, dict):
        raise MalformedRecord("record must be a key/value object", line=number)

    item_id = record.get("item")
    if not isinstance(item_id, str) or not item_id:
        raise MalformedRecord(f"field 'item' must be a non-empty string, got {item_id!r}",
                              line=number)
    t = _require_int(record, "t", number, item_id=item_id)
    action = record.get("action")

    if action == GAP_ACTION:
        missing = _require_int(record, "votes_missing", number, item_id, t)
        if missing < 0:
            raise MalformedRecord("votes_missing must be non-negative", item_id, t, number)
        return "gap", (item_id, t, missing)

    seq = record.get("seq")
    if seq is not None:
        seq = _require_int(record, "seq", number, item_id, t)

    if action == ActionKind.WRITE.value:
        length = _require_int(record, "length", number, item_id, t)
        if length < 1:
            raise MalformedRecord(f"write length must be >= 1, got {length}", item_id, t, number)
        event = ActionRecord(
            item_id=item_id, t=t, kind=ActionKind.WRITE, length=length,
            display_order=_parse_order(record, number, item_id, t),
            seq=position if seq is None else seq,
        )
    elif action == ActionKind.VOTE.value:
        response = _require_int(record, "response", number, item_id, t)
        polarity = _require_int(record, "polarity", number, item_id, t)
        if polarity not in (0, 1):
            raise MalformedRecord(f"polarity must be 0 or 1, got {polarity}", item_id, t, number)
        order = _parse_order(record, number, item_id, t)
        if order is None:
            raise MalformedRecord("vote records require 'order'", item_id, t, number)
        event = ActionRecord(
            item_id=item_id, t=t, kind=ActionKind.VOTE, response=response,
            polarity=polarity, display_order=order,
            seq=position if seq is None else seq,
        )
    else:
        raise MalformedRecord(f"unknown action {action!r}", item_id=item_id, t=t, line=number)
    return ("event_seq" if seq is not None else "event"), event


def _validate_item(item_id: str, raw: _RawItem) -> ItemTrajectory:
    numbered = sorted(raw.events, key=lambda pair: pair[1].t)
    lines = {event.t: number for number, event in numbered}

    for expected, (number, event) in enumerate(numbered, start=1):
        if event.t != expected:
            if event.t < 1:
                raise NonContiguousTime(f"t must start at 1, got {event.t}", item_id, event.t,
                                        number)
            problem = "duplicate" if event.t < expected else f"gap before (expected t={expected})"
            raise NonContiguousTime(f"event index {problem}", item_id, event.t, number)

    events = tuple(event for _, event in numbered)
    J = 0
    for event in events:
        line = lines[event.t]
        if event.t == 1 and not event.is_write:
            raise MalformedRecord("the first event of an item must be a write", item_id, 1, line)
        if event.is_vote and not 0 <= event.response < J:
            raise DanglingVote(f"vote on response {event.response} but only {J} exist",
                               item_id, event.t, line)
        if event.display_order is not None and sorted(event.display_order) != list(range(J)):
            raise BadDisplayOrder(
                f"order {list(event.display_order)} is not a permutation of 0..{J - 1}",
                item_id, event.t, line,
            )
        if event.is_write:
            J += 1

    gaps: Dict[int, int] = {}
    for number, t, missing in raw.gaps:
        if not 2 <= t <= len(events):
            raise NonContiguousTime(f"gap marker must precede an event in 2..{len(events)}",
                                    item_id, t, number)
        gaps[t] = gaps.get(t, 0) + missing

    return ItemTrajectory(item_id=item_id, events=events, gaps=gaps)


def ingest_event_log(stream: LineSource, community_id: str = "community") -> Dataset:
    """
    Read and validate a line-delimited event log.

    Args:
        stream: Binary or text stream (or any iterable of lines) with one
            JSON object per line
        community_id: Identifier attached to the resulting dataset

    Returns:
        A validated Dataset

    Raises:
        MalformedRecord: A field is missing or has the wrong type
        NonContiguousTime: Event indices of an item have gaps or duplicates
        DanglingVote: A vote references a response not yet written
        BadDisplayOrder: A display order is not a permutation
    """
    raw_items: Dict[str, _RawItem] = {}
    position = 0
    with_seq = 0
    without_seq = 0
    seqs: Dict[int, int] = {}

    for number, text in _iter_lines(stream):
        if not text.strip():
            continue
        kind, payload = _parse_record(number, text, position)
        if kind == "gap":
            item_id, t, missing = payload
            raw_items.setdefault(item_id, _RawItem()).gaps.append((number, t, missing))
            continue
        event: ActionRecord = payload
        if kind == "event_seq":
            with_seq += 1
            if event.seq in seqs:
                raise MalformedRecord(
                    f"seq {event.seq} already used on line {seqs[event.seq]}",
                    event.item_id, event.t, number,
                )
            seqs[event.seq] = number
        else:
            without_seq += 1
        if with_seq and without_seq:
            raise MalformedRecord("either every event carries 'seq' or none does",
                                  event.item_id, event.t, number)
        raw_items.setdefault(event.item_id, _RawItem()).events.append((number, event))
        position += 1

    items = []
    for item_id, raw in raw_items.items():
        if not raw.events:
            number = raw.gaps[0][0]
            raise MalformedRecord("item has gap markers but no events", item_id, line=number)
        items.append(_validate_item(item_id, raw))

    dataset = Dataset(community_id=community_id, items=items, explicit_seq=bool(with_seq))
    logger.info(
        f"Ingested {dataset.m} items, {dataset.n_responses} responses and "
        f"{dataset.n_votes} votes for community {community_id}"
    )
    return dataset


def ingest_metadata(stream: LineSource, ds: Dataset) -> Dataset:
    """
    Attach a per-response metadata sidecar to a dataset.

    Each line is a JSON object with ``item``, ``response`` and any of
    ``comment_count``, ``avg_sentiment`` and ``group_tag``. Rows for
    unknown items or responses are rejected.
    """
    known = {item.item_id: item.J_final for item in ds.items}
    metadata: Dict[Tuple[str, int], ResponseMeta] = dict(ds.metadata)

    for number, text in _iter_lines(stream):
        if not text.strip():
            continue
        try:
            row = json.loads(text)
        except json.JSONDecodeError as e:
            raise MalformedRecord(f"not a JSON object: {e.msg}", line=number) from None
        if not isinstance(row, dict):
            raise MalformedRecord("metadata row must be a key/value object", line=number)
        item_id = row.get("item")
        if item_id not in known:
            raise MalformedRecord(f"metadata for unknown item {item_id!r}", line=number)
        response = _require_int(row, "response", number, item_id)
        if not 0 <= response < known[item_id]:
            raise DanglingVote(f"metadata for nonexistent response {response}",
                               item_id=item_id, line=number)

        comments = row.get("comment_count", 0)
        if isinstance(comments, bool) or not isinstance(comments, int) or comments < 0:
            raise MalformedRecord(f"comment_count must be a non-negative integer, got {comments!r}",
                                  item_id=item_id, line=number)
        sentiment = row.get("avg_sentiment")
        if sentiment is not None:
            if isinstance(sentiment, bool) or not isinstance(sentiment, (int, float)):
                raise MalformedRecord(f"avg_sentiment must be a number, got {sentiment!r}",
                                      item_id=item_id, line=number)
            if not -5.0 <= sentiment <= 5.0:
                raise MalformedRecord(f"avg_sentiment must lie in [-5, 5], got {sentiment}",
                                      item_id=item_id, line=number)
            sentiment = float(sentiment)
        tag = row.get("group_tag")
        if tag is not None and not isinstance(tag, str):
            raise MalformedRecord(f"group_tag must be a string, got {tag!r}",
                                  item_id=item_id, line=number)
        metadata[(item_id, response)] = ResponseMeta(
            comment_count=comments, avg_sentiment=sentiment, group_tag=tag
        )

    logger.info(f"Attached metadata for {len(metadata)} responses")
    return replace(ds, metadata=metadata)


# --- Serialization ---------------------------------------------------------


def _dumps(record: Dict[str, Any]) -> str:
    return json.dumps(record, separators=(",", ":"), ensure_ascii=False)


def serialize_event_log(ds: Dataset) -> bytes:
    """
    Write a dataset back to the canonical event-log form.

    Events are emitted in ``seq`` order; gap markers immediately precede the
    event they belong to. ``seq`` is written only when the source carried it.
    """
    ordered = sorted(
        (event.seq, index, event)
        for index, item in enumerate(ds.items)
        for event in item.events
    )
    gaps = {item.item_id: item.gaps for item in ds.items}
    buffer = io.StringIO()
    for _, _, event in ordered:
        missing = gaps[event.item_id].get(event.t)
        if missing is not None:
            buffer.write(_dumps({
                "item": event.item_id, "t": event.t, "action": GAP_ACTION,
                "votes_missing": missing,
            }) + "\n")
        buffer.write(_dumps(event.to_record(include_seq=ds.explicit_seq)) + "\n")
    return buffer.getvalue().encode("utf-8")


def serialize_metadata(ds: Dataset) -> bytes:
    """Write the metadata sidecar in item, then response order."""
    order = {item.item_id: index for index, item in enumerate(ds.items)}
    lines = []
    for (item_id, response), meta in sorted(ds.metadata.items(),
                                            key=lambda kv: (order[kv[0][0]], kv[0][1])):
        row: Dict[str, Any] = {"item": item_id, "response": response,
                               "comment_count": meta.comment_count}
        if meta.avg_sentiment is not None:
            row["avg_sentiment"] = meta.avg_sentiment
        if meta.group_tag is not None:
            row["group_tag"] = meta.group_tag
        lines.append(_dumps(row) + "\n")
    return "".join(lines).encode("utf-8")


# --- Preprocessing ---------------------------------------------------------


@dataclass
class FilterReport:
    """
    Outcome of ``preprocess_filter``.

    Attributes:
        dropped_few_responses: Items with fewer than ``min_responses`` responses
        dropped_fragmented: Items with a gap wider than ``stitch_gap`` votes
        stitched: Items whose fragments were merged
    """
    dropped_few_responses: List[str] = field(default_factory=list)
    dropped_fragmented: List[str] = field(default_factory=list)
    stitched: List[str] = field(default_factory=list)

    @property
    def n_dropped(self) -> int:
        return len(self.dropped_few_responses) + len(self.dropped_fragmented)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dropped_few_responses": list(self.dropped_few_responses),
            "dropped_fragmented": list(self.dropped_fragmented),
            "stitched": list(self.stitched),
        }


def preprocess_filter(
    ds: Dataset,
    min_responses: int = 5,
    stitch_gap: int = 3,
) -> Tuple[Dataset, FilterReport]:
    """
    Drop thin items and stitch fragmented trajectories.

    Fragments separated by at most ``stitch_gap`` missing votes are merged by
    carrying the last known state of the earlier fragment forward (the
    missing votes are not reconstructed). Items with a wider gap are dropped.

    Args:
        ds: A validated dataset
        min_responses: Minimum final response count an item needs to be kept
        stitch_gap: Largest number of missing votes that is filled in

    Returns:
        The filtered dataset and a report of dropped and stitched items
    """
    if min_responses < 1:
        raise ConfigError(f"min_responses must be >= 1, got {min_responses}")
    if stitch_gap < 0:
        raise ConfigError(f"stitch_gap must be >= 0, got {stitch_gap}")

    report = FilterReport()
    kept: List[ItemTrajectory] = []
    for item in ds.items:
        if item.J_final < min_responses:
            report.dropped_few_responses.append(item.item_id)
            continue
        if item.gaps:
            if max(item.gaps.values()) > stitch_gap:
                report.dropped_fragmented.append(item.item_id)
                continue
            item = replace(item, gaps={})
            report.stitched.append(item.item_id)
        kept.append(item)

    if report.n_dropped or report.stitched:
        logger.info(
            f"Filter kept {len(kept)}/{ds.m} items "
            f"({len(report.dropped_few_responses)} thin, "
            f"{len(report.dropped_fragmented)} fragmented, {len(report.stitched)} stitched)"
        )
    return ds.with_items(kept), report
