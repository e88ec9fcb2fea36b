"""
Synthetic trajectories from the full Chinese Voting Process.

Each item starts with a forced write. Every later user looks at the
responses in display order, selects one with probability proportional to its
rank-decay popularity (or writes a new one with weight α), and votes on the
selected response with probability logit^-1(q + λ r + μ s + ν u).

Randomness: the community seed feeds a ``numpy.random.SeedSequence`` whose
k-th spawned child drives item k, so results do not depend on how items are
scheduled across threads.

Example:
    cfg = SimConfig(selection=SelectionParams(tau=1.2), lam=2.0, mu=-1.0, m=200, t_max=60)
    dataset, truth = simulate_community(cfg)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.special import expit

from chinese_voting.core.errors import ConfigError
from chinese_voting.core.trajectory import (
    ActionKind,
    ActionRecord,
    Dataset,
    ItemState,
    ItemTrajectory,
    StateTracker,
    UrnConfig,
)
from chinese_voting.models.base import RankBase, ResponseKey, SelectionParams, VotingParams
from chinese_voting.models.selection import popularity

logger = logging.getLogger(__name__)


class RankMechanism(str, Enum):
    """How the simulated platform orders responses."""
    BY_SCORE = "score"
    BY_POSITIVE_FRACTION = "positive-fraction"
    BY_ARRIVAL = "arrival"


class TieBreak(str, Enum):
    """Secondary order among responses the mechanism cannot separate."""
    BY_ARRIVAL = "arrival"
    BY_LAST_VOTE = "last-vote"


@dataclass(frozen=True)
class LengthModel:
    """
    Log-normal response lengths in characters.

    Attributes:
        median: Median length
        log_sd: Standard deviation of the log length
    """
    median: float = 300.0
    log_sd: float = 0.7

    def __post_init__(self):
        if not self.median > 0 or not np.isfinite(self.median):
            raise ConfigError(f"length median must be positive, got {self.median}")
        if self.log_sd < 0 or not np.isfinite(self.log_sd):
            raise ConfigError(f"length log_sd must be non-negative, got {self.log_sd}")

    def sample(self, rng: np.random.Generator) -> int:
        return max(1, int(round(rng.lognormal(np.log(self.median), self.log_sd))))


@dataclass(frozen=True)
class SimConfig:
    """
    Configuration of a simulated community.

    Attributes:
        selection: Trendiness τ and write propensity α
        lam: Weight of the positive urn ratio
        mu: Weight of the negative urn ratio
        sigma2: Variance of the Gaussian the qualities are drawn from
        nu_mean: Mean of the per-item length bias
        nu_sd: Standard deviation of the per-item length bias (0 fixes ν = nu_mean)
        urn: Urn pseudo-votes and reinforcement
        rank_mechanism: How the platform orders responses
        tie_break: Order among responses the mechanism ties
        length_model: Distribution of new response lengths
        t_max: Events per item
        m: Number of items
        seed: Community seed; every random draw derives from it
        rank_base: Rank convention of the popularity decay
        community_id: Identifier of the generated dataset
    """
    selection: SelectionParams = field(default_factory=SelectionParams)
    lam: float = 0.0
    mu: float = 0.0
    sigma2: float = 1.0
    nu_mean: float = 0.0
    nu_sd: float = 0.0
    urn: UrnConfig = field(default_factory=UrnConfig)
    rank_mechanism: RankMechanism = RankMechanism.BY_SCORE
    tie_break: TieBreak = TieBreak.BY_ARRIVAL
    length_model: LengthModel = field(default_factory=LengthModel)
    t_max: int = 60
    m: int = 200
    seed: int = 0
    rank_base: RankBase = RankBase.ZERO
    community_id: str = "simulated"

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.t_max < 1:
            raise ConfigError(f"t_max must be >= 1, got {self.t_max}")
        if self.m < 1:
            raise ConfigError(f"m must be >= 1, got {self.m}")
        if not self.sigma2 > 0 or not np.isfinite(self.sigma2):
            raise ConfigError(f"sigma2 must be a positive real, got {self.sigma2}")
        if self.nu_sd < 0:
            raise ConfigError(f"nu_sd must be non-negative, got {self.nu_sd}")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        for name in ("lam", "mu", "nu_mean"):
            if not np.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "tau": self.selection.tau,
            "alpha": self.selection.alpha,
            "lambda": self.lam,
            "mu": self.mu,
            "sigma2": self.sigma2,
            "nu_mean": self.nu_mean,
            "nu_sd": self.nu_sd,
            "urn": self.urn.to_dict(),
            "rank_mechanism": self.rank_mechanism.value,
            "tie_break": self.tie_break.value,
            "length_median": self.length_model.median,
            "length_log_sd": self.length_model.log_sd,
            "t_max": self.t_max,
            "m": self.m,
            "seed": self.seed,
            "rank_base": self.rank_base.value,
        }


@dataclass(frozen=True)
class SimulatedItem:
    """A simulated trajectory with the latent values that generated it."""
    trajectory: ItemTrajectory
    quality: Tuple[float, ...]
    nu: float
    arrival_times: np.ndarray


@dataclass
class GroundTruth:
    """
    Parameters a simulated community was generated from.

    Attributes:
        selection: τ and α
        voting: λ, μ, σ², the drawn ν per item and q per response
    """
    selection: SelectionParams
    voting: VotingParams

    @property
    def nu(self) -> Dict[str, float]:
        return self.voting.nu

    @property
    def quality(self) -> Dict[ResponseKey, float]:
        return self.voting.quality


def rank_responses(
    state: ItemState,
    mechanism: RankMechanism = RankMechanism.BY_SCORE,
    tie_break: TieBreak = TieBreak.BY_ARRIVAL,
) -> Tuple[int, ...]:
    """
    Display order of an item's responses, best first.

    ByScore orders by n+ − n−; ByPositiveFraction by n+ / (n+ + n−) (0 for
    unvoted responses), then by total votes; ByArrival by write order. Ties
    fall back to ``tie_break`` and finally to write order.

    Example:
        rank_responses(state, RankMechanism.BY_SCORE)   # scores (3, 0, -1) -> (0, 1, 2)
    """
    index = np.arange(state.J)
    if mechanism == RankMechanism.BY_ARRIVAL:
        return tuple(int(j) for j in index)
    pos = state.pos_votes.astype(np.float64)
    neg = state.neg_votes.astype(np.float64)
    total = pos + neg

    # np.lexsort sorts by the last key first.
    keys: List[np.ndarray] = [index]
    if tie_break == TieBreak.BY_LAST_VOTE:
        keys.append(-state.last_active)
    if mechanism == RankMechanism.BY_SCORE:
        keys.append(-(pos - neg))
    elif mechanism == RankMechanism.BY_POSITIVE_FRACTION:
        fraction = np.divide(pos, total, out=np.zeros_like(pos), where=total > 0)
        keys.append(-total)
        keys.append(-fraction)
    return tuple(int(j) for j in np.lexsort(keys))


def sample_action(
    state: ItemState,
    selection: SelectionParams,
    rng: np.random.Generator,
    rank_base: RankBase = RankBase.ZERO,
) -> int:
    """
    Draw the next action from the selection distribution.

    Returns:
        The selected response index, or ``state.J`` for a new response
    """
    if state.J == 0:
        return 0
    weights = np.append(popularity(state.display_rank, selection.tau, rank_base), selection.alpha)
    cumulative = np.cumsum(weights)
    return int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))


def simulate_item(cfg: SimConfig, item_id: str, rng: np.random.Generator) -> SimulatedItem:
    """
    Simulate ``cfg.t_max`` events of one item.

    Draws, in order: ν for the item, then per event the action, the new
    response's q and length (writes) or the vote polarity (votes), and
    finally the item's exponential inter-arrival times for the community
    clock.
    """
    nu = float(rng.normal(cfg.nu_mean, cfg.nu_sd)) if cfg.nu_sd > 0 else float(cfg.nu_mean)
    sd = float(np.sqrt(cfg.sigma2))
    tracker = StateTracker(cfg.urn)
    quality: List[float] = []
    events: List[ActionRecord] = []

    for t in range(1, cfg.t_max + 1):
        order: Tuple[int, ...] = ()
        if tracker.J:
            order = rank_responses(tracker.snapshot(), cfg.rank_mechanism, cfg.tie_break)
        state = tracker.snapshot(order)
        choice = sample_action(state, cfg.selection, rng, cfg.rank_base)

        if choice == state.J:
            quality.append(float(rng.normal(0.0, sd)))
            length = cfg.length_model.sample(rng)
            events.append(ActionRecord(item_id=item_id, t=t, kind=ActionKind.WRITE,
                                       length=length, display_order=order))
            tracker.add_response(length)
            continue

        g = (cfg.lam * state.ratio_pos[choice] + cfg.mu * state.ratio_neg[choice]
             + nu * state.rel_length[choice])
        polarity = int(rng.random() < expit(quality[choice] + g))
        events.append(ActionRecord(item_id=item_id, t=t, kind=ActionKind.VOTE, response=choice,
                                   polarity=polarity, display_order=order))
        tracker.add_vote(choice, polarity)

    arrival_times = np.cumsum(rng.exponential(1.0, size=cfg.t_max))
    return SimulatedItem(
        trajectory=ItemTrajectory(item_id=item_id, events=tuple(events)),
        quality=tuple(quality),
        nu=nu,
        arrival_times=arrival_times,
    )


def item_rngs(seed: int, m: int) -> List[np.random.Generator]:
    """Per-item generators: item k uses child k of ``SeedSequence(seed)``."""
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(m)]


def _assign_seq(items: List[SimulatedItem]) -> List[ItemTrajectory]:
    """Merge the items' arrival times into one community clock."""
    times = np.concatenate([item.arrival_times for item in items])
    owner = np.concatenate([np.full(item.trajectory.T, k) for k, item in enumerate(items)])
    step = np.concatenate([np.arange(item.trajectory.T) for item in items])
    order = np.lexsort((step, owner, times))
    seq = np.empty(order.shape[0], dtype=np.int64)
    seq[order] = np.arange(order.shape[0])

    trajectories = []
    offset = 0
    for item in items:
        traj = item.trajectory
        events = tuple(
            replace(event, seq=int(seq[offset + k])) for k, event in enumerate(traj.events)
        )
        trajectories.append(replace(traj, events=events))
        offset += traj.T
    return trajectories


def simulate_community(cfg: SimConfig, threads: int = 1) -> Tuple[Dataset, GroundTruth]:
    """
    Simulate ``cfg.m`` independent items.

    Item ids are ``item-00000``, ``item-00001``, ... Events carry a
    community-wide ``seq`` obtained by interleaving the items' arrival times.

    Args:
        cfg: Simulation configuration
        threads: Worker threads; results do not depend on this value

    Returns:
        The dataset and the ground-truth parameters
    """
    width = max(5, len(str(cfg.m - 1)))
    ids = [f"item-{k:0{width}d}" for k in range(cfg.m)]
    rngs = item_rngs(cfg.seed, cfg.m)

    def run(k: int) -> SimulatedItem:
        return simulate_item(cfg, ids[k], rngs[k])

    if threads <= 1:
        items = [run(k) for k in range(cfg.m)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            items = list(pool.map(run, range(cfg.m)))

    dataset = Dataset(
        community_id=cfg.community_id,
        items=_assign_seq(items),
        explicit_seq=True,
    )
    truth = GroundTruth(
        selection=cfg.selection,
        voting=VotingParams(
            lam=cfg.lam,
            mu=cfg.mu,
            nu={item.trajectory.item_id: item.nu for item in items},
            quality={
                (item.trajectory.item_id, j): q
                for item in items
                for j, q in enumerate(item.quality)
            },
            sigma2=cfg.sigma2,
        ),
    )
    logger.info(
        f"Simulated {cfg.m} items, {dataset.n_responses} responses and {dataset.n_votes} votes "
        f"(tau={cfg.selection.tau}, lambda={cfg.lam}, mu={cfg.mu}, seed={cfg.seed})"
    )
    return dataset, truth
