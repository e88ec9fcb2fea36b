"""
Community behavioral coefficients: Trendiness and Conformity.

Trendiness is the fitted τ of the selection phase. Conformity κ is the
geometric mean, over every vote, of the odds that the vote agrees with the
current majority of its response, each vote scored by a model fitted only on
the data that preceded it on the community clock.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from chinese_voting.core.errors import ConfigError, TooShort, Unidentifiable
from chinese_voting.core.events import EventEmitter, EventType
from chinese_voting.core.trajectory import Dataset, UrnConfig
from chinese_voting.models.base import FeatureMask, FitOptions, RankBase, VotingParams
from chinese_voting.models.selection import fit_tau
from chinese_voting.models.voting import VotingDesign, fit_design

logger = logging.getLogger(__name__)

DEFAULT_REFIT_STRIDE = 25
DEFAULT_FULL_REFIT_EVERY = 500


def trendiness(ds: Dataset, alpha: float = 0.5, rank_base: RankBase = RankBase.ZERO) -> float:
    """
    Trendiness τ of a community.

    Raises:
        Unidentifiable: If no selection event depends on τ
    """
    return fit_tau(ds, alpha=alpha, rank_base=rank_base).tau


def majority_sign(n_pos: np.ndarray, n_neg: np.ndarray) -> np.ndarray:
    """+1 where the response's majority is positive (ties included), else -1."""
    return np.where(np.asarray(n_pos) >= np.asarray(n_neg), 1.0, -1.0)


def kappa(log_odds: np.ndarray, majority: np.ndarray) -> float:
    """
    Geometric mean of majority-agreement odds.

    Args:
        log_odds: log p(v=1) − log p(v=0) per vote
        majority: +1 or -1 per vote, as from ``majority_sign``

    Raises:
        TooShort: If there are no votes
    """
    log_odds = np.asarray(log_odds, dtype=np.float64)
    if log_odds.size == 0:
        raise TooShort("conformity needs at least one vote")
    return float(np.exp(np.mean(np.asarray(majority) * log_odds)))


def conformity_log_odds(
    design: VotingDesign,
    sigma2: float = 1.0,
    knockout: FeatureMask = FeatureMask(),
    options: FitOptions = FitOptions(),
    refit_stride: int = DEFAULT_REFIT_STRIDE,
    full_refit_every: int = DEFAULT_FULL_REFIT_EVERY,
    emitter: Optional[EventEmitter] = None,
    community_id: str = "community",
) -> np.ndarray:
    """
    Log-odds of every vote under a model fitted strictly before it.

    Votes are taken in community-clock (``seq``) order in windows of
    ``refit_stride``. Before each window the model is refitted on all rows
    earlier than the window's first vote, warm-started from the previous
    window; every ``full_refit_every`` votes the fit restarts from zero.

    Returns:
        log-odds aligned with the design's vote rows
    """
    if refit_stride < 1:
        raise ConfigError(f"refit_stride must be >= 1, got {refit_stride}")
    if full_refit_every < 1:
        raise ConfigError(f"full_refit_every must be >= 1, got {full_refit_every}")

    order = np.argsort(design.vote_seq, kind="stable")
    log_odds = np.empty(design.n_votes)
    vec: Optional[np.ndarray] = None
    block = -1
    for start in range(0, design.n_votes, refit_stride):
        window = order[start:start + refit_stride]
        cold = start // full_refit_every != block
        block = start // full_refit_every
        train = design.before_seq(int(design.vote_seq[window[0]]))
        result, vec = fit_design(train, sigma2=sigma2, init=None if cold else vec,
                                 knockout=knockout, options=options)
        log_odds[window] = design.linear_predictor(vec)[window]
        logger.debug(
            f"Refit before vote {start} on {train.n_votes} votes "
            f"({'cold' if cold else 'warm'}, {result.iterations} iterations)"
        )
        if emitter is not None:
            emitter.emit_to_community(community_id, EventType.REFIT, {
                "vote_index": start,
                "train_votes": train.n_votes,
                "cold": cold,
                "iterations": result.iterations,
            })
    return log_odds


def conformity(
    ds: Dataset,
    urn: UrnConfig = UrnConfig(),
    options: FitOptions = FitOptions(),
    refit_stride: int = DEFAULT_REFIT_STRIDE,
    sigma2: float = 1.0,
    knockout: FeatureMask = FeatureMask(),
    include_first: bool = True,
    flip_majority: bool = False,
    params: Optional[VotingParams] = None,
    full_refit_every: int = DEFAULT_FULL_REFIT_EVERY,
    design: Optional[VotingDesign] = None,
    emitter: Optional[EventEmitter] = None,
) -> float:
    """
    Conformity κ of a community.

    κ = exp(mean_v h_v (log p(v=1|θ) − log p(v=0|θ))), where h_v is +1 when
    the voted response had at least as many positive as negative votes
    before the vote and -1 otherwise.

    Args:
        ds: Dataset to score
        urn: Urn configuration of the ratio features
        options: Voting fit options for every refit
        refit_stride: Votes scored between refits
        sigma2: Quality prior variance
        knockout: Parameter groups pinned to 0
        include_first: Score the community's first vote (fitted on no votes)
        flip_majority: Use -h, which maps κ to 1/κ
        params: Score every vote under these fixed parameters instead of refitting
        full_refit_every: Votes between cold refits
        design: Prebuilt design for ``ds``

    Raises:
        TooShort: If no vote enters the mean
    """
    if design is None:
        design = VotingDesign.build(ds, urn)
    if params is not None:
        log_odds = design.linear_predictor(design.pack(params, strict=True))
    else:
        log_odds = conformity_log_odds(design, sigma2, knockout, options, refit_stride,
                                       full_refit_every, emitter, ds.community_id)

    h = majority_sign(design.n_pos, design.n_neg)
    if flip_majority:
        h = -h
    keep = np.ones(design.n_votes, dtype=bool)
    if not include_first and design.n_votes:
        keep[np.argmin(design.vote_seq)] = False
    value = kappa(log_odds[keep], h[keep])
    logger.info(f"Conformity of {ds.community_id}: kappa={value:.6f} over {int(keep.sum())} votes")
    return value


@dataclass(frozen=True)
class CoeffRow:
    """One point of the (trendiness, conformity) embedding."""
    community_id: str
    group_tag: Optional[str]
    trendiness: float
    conformity: float
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "community_id": self.community_id,
            "group_tag": self.group_tag if self.group_tag is not None else "",
            "trendiness": self.trendiness,
            "conformity": self.conformity,
            "n": self.n,
        }


@dataclass
class CoeffReport:
    """
    Behavioral coefficients of a community and of its tagged sub-communities.

    Attributes:
        community_id: Community identifier
        trendiness: τ of the whole community
        conformity: κ of the whole community
        n_votes_used: Votes entering κ
        refit_stride: Votes between refits
        tau_saturated: Whether τ hit the search bracket
        groups: One row per ``group_tag``
    """
    community_id: str
    trendiness: float
    conformity: float
    n_votes_used: int
    refit_stride: int
    tau_saturated: bool = False
    groups: List[CoeffRow] = field(default_factory=list)

    @property
    def rows(self) -> List[CoeffRow]:
        overall = CoeffRow(self.community_id, None, self.trendiness, self.conformity,
                           self.n_votes_used)
        return [overall] + list(self.groups)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([row.to_dict() for row in self.rows],
                            columns=["community_id", "group_tag", "trendiness", "conformity", "n"])


def compute_coefficients(
    ds: Dataset,
    urn: UrnConfig = UrnConfig(),
    alpha: float = 0.5,
    rank_base: RankBase = RankBase.ZERO,
    options: FitOptions = FitOptions(),
    sigma2: float = 1.0,
    refit_stride: int = DEFAULT_REFIT_STRIDE,
    full_refit_every: int = DEFAULT_FULL_REFIT_EVERY,
    include_first: bool = True,
    by_group: bool = True,
    emitter: Optional[EventEmitter] = None,
) -> CoeffReport:
    """
    Trendiness and conformity of a community, plus one row per group tag.

    Groups whose τ is unidentifiable are left out of the report with a
    warning; the whole-community coefficients are always computed.
    """
    tau_fit = fit_tau(ds, alpha=alpha, rank_base=rank_base)
    if emitter is not None:
        emitter.emit_to_community(ds.community_id, EventType.TAU_FITTED, tau_fit.to_dict())
    n_used = ds.n_votes - (0 if include_first or not ds.n_votes else 1)
    report = CoeffReport(
        community_id=ds.community_id,
        trendiness=tau_fit.tau,
        conformity=conformity(ds, urn, options, refit_stride, sigma2=sigma2,
                              include_first=include_first, full_refit_every=full_refit_every,
                              emitter=emitter),
        n_votes_used=n_used,
        refit_stride=refit_stride,
        tau_saturated=tau_fit.saturated,
    )

    if by_group:
        tags: Dict[str, list] = {}
        for item in ds.items:
            tag = ds.group_of(item)
            if tag is not None:
                tags.setdefault(tag, []).append(item)
        for tag in sorted(tags):
            sub = ds.with_items(tags[tag])
            try:
                tau = fit_tau(sub, alpha=alpha, rank_base=rank_base).tau
                kap = conformity(sub, urn, options, refit_stride, sigma2=sigma2,
                                 include_first=include_first,
                                 full_refit_every=full_refit_every)
            except (Unidentifiable, TooShort) as e:
                logger.warning(f"Skipping group {tag!r} of {ds.community_id}: {e}")
                continue
            report.groups.append(CoeffRow(ds.community_id, tag, tau, kap, sub.n_votes))

    logger.info(
        f"Coefficients of {ds.community_id}: trendiness={report.trendiness:.4f} "
        f"conformity={report.conformity:.4f} ({len(report.groups)} groups)"
    )
    return report
