"""
Chinese Voting Process - a library for analyzing helpfulness-vote trajectories

This library replays and simulates the vote histories of community Q&A and
review sites, fits the Chinese Voting Process (a rank-decay selection phase
followed by a Pólya-urn-biased logistic voting phase) by maximum likelihood,
and derives community-level behavioral coefficients and evaluation reports.

Key Features:
- Validated event-log ingestion and deterministic replay
- Voting-phase fit with per-response quality, urn-ratio biases and length bias
- Trendiness (τ) fit and the CRP baseline for the selection phase
- Conformity (κ) with warm-started refits along the community clock
- Predictive next-action evaluation with feature ablations
- Display-rank vs. quality ranking analysis against comment sentiment
- A seeded simulator with pluggable ranking mechanisms

Example:
    from chinese_voting import AnalyzerConfig, CommunityAnalyzer

    analyzer = CommunityAnalyzer(AnalyzerConfig(alpha=0.5))
    dataset = analyzer.load("events.jsonl", community_id="stats")

    fit, tau = analyzer.fit(dataset)
    report = analyzer.coefficients(dataset)
"""

__version__ = "0.1.0"
__author__ = "Your Name"

from chinese_voting.core.events import Event, EventEmitter, EventType
from chinese_voting.core.pipeline import AnalyzerConfig, CommunityAnalyzer
from chinese_voting.core.trajectory import Dataset, UrnConfig, ingest_event_log, replay

__all__ = [
    "AnalyzerConfig",
    "CommunityAnalyzer",
    "Dataset",
    "UrnConfig",
    "ingest_event_log",
    "replay",
    "EventEmitter",
    "Event",
    "EventType",
]
