"""
Synthetic community generation.
"""

from chinese_voting.simulation.simulator import (
    GroundTruth,
    LengthModel,
    RankMechanism,
    SimConfig,
    SimulatedItem,
    TieBreak,
    item_rngs,
    rank_responses,
    sample_action,
    simulate_community,
    simulate_item,
)

__all__ = [
    "GroundTruth",
    "LengthModel",
    "RankMechanism",
    "SimConfig",
    "SimulatedItem",
    "TieBreak",
    "item_rngs",
    "rank_responses",
    "sample_action",
    "simulate_community",
    "simulate_item",
]
