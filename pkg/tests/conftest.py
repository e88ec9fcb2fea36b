"""Pytest configuration and fixtures."""

import pytest

from chinese_voting.core.trajectory import ingest_event_log
from chinese_voting.models.base import SelectionParams
from chinese_voting.simulation.simulator import SimConfig, simulate_community
from tests.helpers import make_log, vote, write


@pytest.fixture
def minimal_log():
    """Smallest valid log: one write and one vote."""
    return make_log([write("p1", 1), vote("p1", 2, 0, 1, [0])])


@pytest.fixture
def two_response_dataset():
    """Two responses of lengths 100 and 300, one vote on each."""
    return ingest_event_log(make_log([
        write("p1", 1, length=100),
        write("p1", 2, length=300, order=[0]),
        vote("p1", 3, 0, 1, [0, 1]),
        vote("p1", 4, 1, 0, [0, 1]),
    ]))


@pytest.fixture
def herding_votes():
    """Three positive votes followed by three negative ones."""
    return [1, 1, 1, 0, 0, 0]


@pytest.fixture
def alternating_votes():
    """Positive and negative votes in turn."""
    return [1, 0, 1, 0, 1, 0]


@pytest.fixture(scope="session")
def small_community():
    """A small simulated community with every model component active."""
    cfg = SimConfig(
        selection=SelectionParams(tau=1.0, alpha=0.5),
        lam=2.0,
        mu=-1.0,
        nu_mean=0.3,
        nu_sd=0.2,
        m=12,
        t_max=25,
        seed=11,
    )
    return simulate_community(cfg)


@pytest.fixture(scope="session")
def trendy_community():
    """200 items of 60 events with strong rank-following (tau = 1.5)."""
    cfg = SimConfig(selection=SelectionParams(tau=1.5, alpha=0.5), m=200, t_max=60, seed=7)
    return simulate_community(cfg)


@pytest.fixture(scope="session")
def flat_community():
    """200 items of 60 events where display rank does not matter (tau = 0)."""
    cfg = SimConfig(selection=SelectionParams(tau=0.0, alpha=0.5), m=200, t_max=60, seed=8)
    return simulate_community(cfg)


@pytest.fixture(scope="session")
def recovery_community():
    """Full-size community for simulate-then-fit checks."""
    cfg = SimConfig(
        selection=SelectionParams(tau=1.2, alpha=0.5),
        lam=2.0,
        mu=-1.0,
        m=200,
        t_max=60,
        seed=2024,
    )
    return simulate_community(cfg)
