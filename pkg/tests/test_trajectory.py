"""Tests for event-log ingestion, replay and preprocessing."""

import io

import numpy as np
import pytest

from chinese_voting.core.errors import (
    BadDisplayOrder,
    ConfigError,
    DanglingVote,
    MalformedRecord,
    NonContiguousTime,
)
from chinese_voting.core.trajectory import (
    UrnConfig,
    ingest_event_log,
    ingest_metadata,
    preprocess_filter,
    replay,
    replay_dataset,
    serialize_event_log,
    serialize_metadata,
)
from tests.helpers import gap, make_log, single_response_log, vote, write, writes_only


def test_ingest_minimal_log(minimal_log):
    """Test ingesting a write followed by a vote."""
    ds = ingest_event_log(io.BytesIO(minimal_log), community_id="stats")

    assert ds.community_id == "stats"
    assert ds.m == 1
    item = ds.items[0]
    assert item.T == 2
    assert item.J_final == 1
    assert item.n_votes == 1
    assert not ds.explicit_seq


def test_ingest_accepts_text_lines(minimal_log):
    """Test that any iterable of text lines can be ingested."""
    lines = minimal_log.decode("utf-8").splitlines()
    ds = ingest_event_log(lines)

    assert ds.n_votes == 1


def test_ingest_groups_interleaved_items():
    """Test that events of interleaved items are grouped and ordered by t."""
    log = make_log([
        write("b", 1),
        write("a", 1),
        vote("a", 2, 0, 1, [0]),
        vote("b", 2, 0, 0, [0]),
    ])
    ds = ingest_event_log(log)

    assert [item.item_id for item in ds.items] == ["b", "a"]
    assert [e.seq for e in ds.item("a").events] == [1, 2]


def test_ingest_time_gap():
    """Test that a missing event index is rejected with its location."""
    log = make_log([write("p1", 1), vote("p1", 3, 0, 1, [0])])

    with pytest.raises(NonContiguousTime) as excinfo:
        ingest_event_log(log)

    assert excinfo.value.item_id == "p1"
    assert excinfo.value.t == 3
    assert excinfo.value.line == 2


def test_ingest_duplicate_time():
    """Test that a repeated event index is rejected."""
    log = make_log([write("p1", 1), vote("p1", 2, 0, 1, [0]), vote("p1", 2, 0, 0, [0])])

    with pytest.raises(NonContiguousTime):
        ingest_event_log(log)


def test_ingest_time_must_start_at_one():
    """Test that an item whose first event has t=0 names the expected start."""
    log = make_log([write("p1", 0), vote("p1", 1, 0, 1, [0])])

    with pytest.raises(NonContiguousTime, match="t must start at 1") as excinfo:
        ingest_event_log(log)

    assert excinfo.value.t == 0
    assert excinfo.value.line == 1


def test_ingest_dangling_vote():
    """Test that a vote on a response that does not exist is rejected."""
    log = make_log([write("p1", 1), vote("p1", 2, 5, 1, [0])])

    with pytest.raises(DanglingVote) as excinfo:
        ingest_event_log(log)

    assert excinfo.value.t == 2


def test_ingest_bad_display_order():
    """Test that a display order must be a permutation of the existing responses."""
    log = make_log([write("p1", 1), write("p1", 2, order=[0]), vote("p1", 3, 0, 1, [0, 0])])

    with pytest.raises(BadDisplayOrder):
        ingest_event_log(log)


def test_ingest_malformed_records():
    """Test that broken lines report their line number."""
    bad_json = make_log([write("p1", 1)]) + b"{not json\n"
    with pytest.raises(MalformedRecord) as excinfo:
        ingest_event_log(bad_json)
    assert excinfo.value.line == 2

    with pytest.raises(MalformedRecord):
        ingest_event_log(make_log([write("p1", 1, length="long")]))
    with pytest.raises(MalformedRecord):
        ingest_event_log(make_log([write("p1", 1), vote("p1", 2, 0, 2, [0])]))
    with pytest.raises(MalformedRecord):
        ingest_event_log(make_log([write("p1", 1), {"item": "p1", "t": 2, "action": "vote",
                                                    "response": 0, "polarity": 1}]))
    with pytest.raises(MalformedRecord):
        ingest_event_log(make_log([vote("p1", 1, 0, 1, [])]))


def test_ingest_seq_all_or_none():
    """Test that seq must be present on every event or on none."""
    log = make_log([write("p1", 1, seq=0), vote("p1", 2, 0, 1, [0])])

    with pytest.raises(MalformedRecord):
        ingest_event_log(log)

    ds = ingest_event_log(make_log([write("p1", 1, seq=10), vote("p1", 2, 0, 1, [0], seq=20)]))
    assert ds.explicit_seq
    assert [e.seq for e in ds.items[0].events] == [10, 20]


def test_replay_herding_ratios():
    """Test urn ratios after three positive and one negative vote."""
    ds = ingest_event_log(make_log(single_response_log("p1", [1, 1, 1, 0, 1])))
    states = replay(ds.items[0], UrnConfig(1.0, 1.0, 1.0))

    state = states[5]
    assert state.t == 6
    assert state.ratio_pos[0] == pytest.approx(4 / 6)
    assert state.ratio_neg[0] == pytest.approx(2 / 6)
    assert state.pos_votes[0] == 3
    assert state.neg_votes[0] == 1


def test_replay_uniform_prior():
    """Test that an unvoted response sits at the prior ratio."""
    ds = ingest_event_log(make_log(single_response_log("p1", [1])))
    state = replay(ds.items[0], UrnConfig())[1]

    assert state.ratio_pos[0] == 0.5
    assert state.ratio_neg[0] == 0.5


def test_replay_relative_length(two_response_dataset):
    """Test relative lengths against the mean response length."""
    state = replay(two_response_dataset.items[0], UrnConfig())[2]

    np.testing.assert_allclose(state.rel_length, [0.5, 1.5])
    assert state.mean_length == 200.0
    np.testing.assert_array_equal(state.display_rank, [1, 2])


def test_replay_first_state_is_empty(two_response_dataset):
    """Test that the state before the first write has no responses."""
    state = replay(two_response_dataset.items[0], UrnConfig())[0]

    assert state.J == 0
    assert state.mean_length == 0.0


def test_replay_urn_identity(small_community):
    """Test urn masses, ratio complement and mean relative length on every state."""
    ds, _ = small_community
    urn = UrnConfig(x0=0.5, y0=2.0, w=1.5)
    for states in replay_dataset(ds, urn):
        for state in states[1:]:
            np.testing.assert_array_equal(state.urn_x - urn.x0, urn.w * state.pos_votes)
            np.testing.assert_array_equal(state.urn_y - urn.y0, urn.w * state.neg_votes)
            assert np.all(state.ratio_pos + state.ratio_neg == 1.0)
            assert abs(state.rel_length.mean() - 1.0) < 1e-9


def test_replay_deterministic_and_thread_independent(small_community):
    """Test that replaying twice, or on threads, gives identical states."""
    ds, _ = small_community
    serial = replay_dataset(ds, UrnConfig())
    threaded = replay_dataset(ds, UrnConfig(), threads=4)

    for a_states, b_states in zip(serial, threaded):
        for a, b in zip(a_states, b_states):
            np.testing.assert_array_equal(a.ratio_pos, b.ratio_pos)
            np.testing.assert_array_equal(a.display_rank, b.display_rank)


def test_state_arrays_read_only(two_response_dataset):
    """Test that replayed states cannot be modified."""
    state = replay(two_response_dataset.items[0], UrnConfig())[3]

    with pytest.raises(ValueError):
        state.pos_votes[0] = 10


def test_urn_config_parse():
    """Test parsing and validating urn triples."""
    assert UrnConfig.parse("1, 2, 0.5") == UrnConfig(1.0, 2.0, 0.5)

    with pytest.raises(ConfigError):
        UrnConfig.parse("1,1")
    with pytest.raises(ConfigError):
        UrnConfig(x0=0.0)


def test_filter_drops_thin_items():
    """Test that items with too few responses are dropped."""
    log = make_log(writes_only("thin", 4) + writes_only("thick", 5))
    ds = ingest_event_log(log)

    filtered, report = preprocess_filter(ds, min_responses=5)

    assert [item.item_id for item in filtered.items] == ["thick"]
    assert report.dropped_few_responses == ["thin"]


def test_filter_min_responses_one_is_noop(small_community):
    """Test that a threshold of one keeps the dataset unchanged."""
    ds, _ = small_community
    filtered, report = preprocess_filter(ds, min_responses=1)

    assert filtered.items == ds.items
    assert report.n_dropped == 0


def test_filter_stitches_small_gaps():
    """Test that fragments separated by a small gap are merged."""
    records = single_response_log("p1", [1, 1, 0])
    records.insert(2, gap("p1", 3, 2))
    ds = ingest_event_log(make_log(records))
    assert ds.items[0].gaps == {3: 2}

    filtered, report = preprocess_filter(ds, min_responses=1, stitch_gap=3)

    assert report.stitched == ["p1"]
    assert filtered.items[0].gaps == {}
    assert filtered.items[0].T == 4


def test_filter_drops_wide_gaps():
    """Test that fragments separated by a wide gap are dropped."""
    records = single_response_log("p1", [1, 1, 0])
    records.insert(2, gap("p1", 3, 5))
    ds = ingest_event_log(make_log(records))

    filtered, report = preprocess_filter(ds, min_responses=1, stitch_gap=3)

    assert filtered.m == 0
    assert report.dropped_fragmented == ["p1"]


def test_serialize_round_trip():
    """Test that a canonical log is reproduced byte for byte."""
    records = [
        write("p1", 1),
        write("p2", 1, length=250),
        write("p1", 2, length=40, order=[0]),
        vote("p1", 3, 1, 0, [0, 1]),
    ]
    records.append(gap("p2", 2, 1))
    records.append(vote("p2", 2, 0, 1, [0]))
    log = make_log(records)

    assert serialize_event_log(ingest_event_log(log)) == log


def test_serialize_round_trip_with_seq():
    """Test that explicit seq values survive a round trip."""
    log = make_log([write("p1", 1, seq=3), vote("p1", 2, 0, 1, [0], seq=9)])

    assert serialize_event_log(ingest_event_log(log)) == log


def test_metadata_sidecar(two_response_dataset):
    """Test attaching and re-serializing per-response metadata."""
    sidecar = make_log([
        {"item": "p1", "response": 1, "comment_count": 2, "avg_sentiment": -1.5},
        {"item": "p1", "response": 0, "comment_count": 0, "group_tag": "python"},
    ])
    ds = ingest_metadata(sidecar, two_response_dataset)

    assert ds.metadata[("p1", 1)].avg_sentiment == -1.5
    assert ds.metadata[("p1", 0)].avg_sentiment is None
    assert ds.group_of(ds.items[0]) == "python"
    assert ds.summary()["metadata_rows"] == 2
    assert serialize_metadata(ds).splitlines()[0].startswith(b'{"item":"p1","response":0')


def test_metadata_rejects_bad_rows(two_response_dataset):
    """Test metadata validation."""
    with pytest.raises(MalformedRecord):
        ingest_metadata(make_log([{"item": "zz", "response": 0}]), two_response_dataset)
    with pytest.raises(DanglingVote):
        ingest_metadata(make_log([{"item": "p1", "response": 7}]), two_response_dataset)
    with pytest.raises(MalformedRecord):
        ingest_metadata(make_log([{"item": "p1", "response": 0, "avg_sentiment": 9}]),
                        two_response_dataset)
