"""Tests for CommunityAnalyzer."""

import pytest

from chinese_voting import AnalyzerConfig, CommunityAnalyzer, EventType
from chinese_voting.core.errors import ConfigError
from chinese_voting.core.trajectory import serialize_event_log
from chinese_voting.models.base import FeatureMask, SelectionParams
from chinese_voting.simulation.simulator import SimConfig
from tests.helpers import make_log, single_response_log, writes_only


def _collecting_analyzer(**config):
    analyzer = CommunityAnalyzer(AnalyzerConfig(**config))
    events = []
    analyzer.event_emitter.on_all(events.append)
    return analyzer, events


def test_config_defaults():
    """Test the analyzer defaults."""
    config = AnalyzerConfig()

    assert config.alpha == 0.5
    assert config.horizon == 50
    assert config.refit_stride == 25
    assert config.fit_options.ridge == 0.5
    assert config.to_dict()["knockout"] == ""


def test_config_validation():
    """Test that out-of-range options are rejected on construction."""
    with pytest.raises(ConfigError):
        AnalyzerConfig(alpha=0.0)
    with pytest.raises(ConfigError):
        AnalyzerConfig(horizon=1)
    with pytest.raises(ConfigError):
        AnalyzerConfig(residual="cubic")
    with pytest.raises(ConfigError):
        AnalyzerConfig(max_iters=0)


def test_load_from_path(tmp_path, small_community):
    """Test loading an event log from disk."""
    ds, _ = small_community
    path = tmp_path / "events.jsonl"
    path.write_bytes(serialize_event_log(ds))
    analyzer, events = _collecting_analyzer()

    loaded = analyzer.load(str(path), community_id="sim")

    assert loaded.summary()["votes"] == ds.n_votes
    assert events[-1].type == EventType.INGEST_COMPLETED
    assert events[-1].community_id == "sim"


def test_load_with_metadata(tmp_path):
    """Test loading a log together with its metadata sidecar."""
    (tmp_path / "events.jsonl").write_bytes(make_log(single_response_log("p1", [1, 0])))
    (tmp_path / "meta.jsonl").write_bytes(
        make_log([{"item": "p1", "response": 0, "avg_sentiment": 2.0}])
    )
    analyzer = CommunityAnalyzer()

    ds = analyzer.load(tmp_path / "events.jsonl", metadata=tmp_path / "meta.jsonl")

    assert ds.metadata[("p1", 0)].avg_sentiment == 2.0


def test_filter_reports(small_community):
    """Test filtering through the analyzer."""
    analyzer, events = _collecting_analyzer(min_responses=1000)
    ds, _ = small_community

    filtered, report = analyzer.filter(ds)

    assert filtered.m == 0
    assert len(report.dropped_few_responses) == ds.m
    types = [e.type for e in events]
    assert EventType.WARNING in types
    assert types[-1] == EventType.FILTER_APPLIED


def test_fit_emits_progress(small_community):
    """Test that fitting reports start, voting result and tau."""
    ds, _ = small_community
    analyzer, events = _collecting_analyzer()

    result, tau = analyzer.fit(ds)

    assert result.converged
    assert tau is not None
    assert [e.type for e in events] == [
        EventType.FIT_STARTED, EventType.FIT_COMPLETED, EventType.TAU_FITTED,
    ]


def test_fit_without_tau_information():
    """Test that an uninformative log still fits, with a warning instead of tau."""
    ds = CommunityAnalyzer().load(make_log(single_response_log("p1", [1, 1, 0])))
    analyzer, events = _collecting_analyzer()

    result, tau = analyzer.fit(ds)

    assert tau is None
    assert EventType.WARNING in [e.type for e in events]
    assert ("p1", 0) in result.params.quality


def test_simulate(small_community):
    """Test simulation through the analyzer."""
    analyzer = CommunityAnalyzer(AnalyzerConfig(threads=2))
    cfg = SimConfig(selection=SelectionParams(tau=1.0), m=4, t_max=10, seed=1)

    ds, truth = analyzer.simulate(cfg)

    assert ds.m == 4
    assert len(truth.nu) == 4


def test_evaluate_uses_configured_knockout(small_community):
    """Test that evaluate scores the configured variant."""
    ds, _ = small_community
    analyzer = CommunityAnalyzer(AnalyzerConfig(knockout=FeatureMask.parse("nu"), horizon=4))

    report = analyzer.evaluate(ds)

    assert list(report.summary["model"]) == ["cvp-nu", "crp"]


def test_with_config_shares_emitter():
    """Test deriving an analyzer with different options."""
    analyzer = CommunityAnalyzer()

    derived = analyzer.with_config(alpha=1.0)

    assert derived.config.alpha == 1.0
    assert analyzer.config.alpha == 0.5
    assert derived.event_emitter is analyzer.event_emitter


def test_filter_keeps_thick_items():
    """Test the default response threshold."""
    analyzer = CommunityAnalyzer()
    ds = analyzer.load(make_log(writes_only("a", 5) + writes_only("b", 2)))

    filtered, _ = analyzer.filter(ds)

    assert [item.item_id for item in filtered.items] == ["a"]
