"""
Selection phase of the Chinese Voting Process.

Each user either evaluates an existing response, with weight given by the
rank-decay popularity f(j) = (1 / (1 + rank_j))^τ, or writes a new response
with weight α. The trendiness τ is fitted by maximizing the selection
log-likelihood, which is concave in τ for fixed α. The Chinese Restaurant
Process, which weights responses by accumulated votes, is kept as a baseline.
"""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np
from scipy.optimize import brentq

from chinese_voting.core.errors import MissingDisplayOrder, Unidentifiable, ValidationError
from chinese_voting.core.trajectory import Dataset, ItemState, UrnConfig, replay_dataset
from chinese_voting.models.base import RankBase, SelectionParams

logger = logging.getLogger(__name__)

TAU_BRACKET = (-10.0, 10.0)


def popularity(display_rank, tau: float, rank_base: RankBase = RankBase.ZERO):
    """
    Rank-decay popularity (1 / (1 + rank))^τ.

    With the default zero-based internal rank the top response has f = 1.
    Accepts a scalar or an array of 1-based display ranks.
    """
    ranks = np.asarray(display_rank)
    if np.any(ranks < 1):
        raise ValidationError(f"display ranks are 1-based, got {display_rank}")
    values = np.exp(-tau * np.log1p(rank_base.internal(ranks)))
    return float(values) if values.ndim == 0 else values


def _ranks(state: ItemState) -> np.ndarray:
    if state.J and state.display_rank is None:
        raise MissingDisplayOrder("selection needs the display order before this event", t=state.t)
    return state.display_rank if state.J else np.zeros(0, dtype=np.int64)


def selection_distribution(
    state: ItemState,
    params: SelectionParams,
    rank_base: RankBase = RankBase.ZERO,
) -> np.ndarray:
    """
    Probabilities of selecting each existing response, then of writing.

    Returns:
        Vector of length J + 1; the last entry is the write probability
    """
    weights = np.append(popularity(_ranks(state), params.tau, rank_base), params.alpha)
    return weights / weights.sum()


def crp_selection_distribution(state: ItemState, alpha: float, literal: bool = False) -> np.ndarray:
    """
    CRP baseline: responses weighted by accumulated votes, writing by α.

    Each response carries one pseudo-count (its writer) unless ``literal``,
    in which case unvoted responses get zero mass.
    """
    counts = state.total_votes.astype(np.float64)
    if not literal:
        counts = counts + 1.0
    weights = np.append(counts, alpha)
    return weights / weights.sum()


@dataclass(frozen=True)
class SelectionDesign:
    """
    Flattened selection events of a dataset.

    Every event except an item's forced first write becomes a segment of
    cells, one cell per response existing before the event.

    Attributes:
        log_rank: log(1 + internal rank) per cell
        counts: Votes accumulated by the cell's response
        cell_event: Event (segment) index of each cell
        chosen: Cell index of the selected response, or -1 for a write
        event_item: Item index of each event
        event_t: Within-item index of each event
        event_seq: Community clock of each event
        n_events: Number of events
    """
    log_rank: np.ndarray
    counts: np.ndarray
    cell_event: np.ndarray
    chosen: np.ndarray
    event_item: np.ndarray
    event_t: np.ndarray
    event_seq: np.ndarray
    n_events: int

    @classmethod
    def build(
        cls,
        ds: Dataset,
        rank_base: RankBase = RankBase.ZERO,
        threads: int = 1,
        states: Optional[List[List[ItemState]]] = None,
        require_order: bool = True,
    ) -> "SelectionDesign":
        """
        Collect selection events from a dataset.

        Raises:
            MissingDisplayOrder: If an event after the first lacks its display order
                and ``require_order`` is set (otherwise it is ranked in write order)
        """
        if states is None:
            states = replay_dataset(ds, UrnConfig(), threads=threads)
        log_rank: List[np.ndarray] = []
        counts: List[np.ndarray] = []
        chosen: List[int] = []
        items: List[int] = []
        times: List[int] = []
        seqs: List[int] = []
        n_cells = 0

        for i, (item, item_states) in enumerate(zip(ds.items, states)):
            for event, state in zip(item.events[1:], item_states[1:]):
                ranks = state.display_rank
                if ranks is None:
                    if require_order:
                        raise MissingDisplayOrder("selection needs the display order",
                                                  item_id=item.item_id, t=event.t)
                    ranks = np.arange(1, state.J + 1)
                log_rank.append(np.log1p(rank_base.internal(ranks)).astype(np.float64))
                counts.append(state.total_votes.astype(np.float64))
                chosen.append(n_cells + event.response if event.is_vote else -1)
                n_cells += state.J
                items.append(i)
                times.append(event.t)
                seqs.append(event.seq)

        n_events = len(chosen)
        sizes = [len(lr) for lr in log_rank]
        return cls(
            log_rank=np.concatenate(log_rank) if log_rank else np.zeros(0),
            counts=np.concatenate(counts) if counts else np.zeros(0),
            cell_event=np.repeat(np.arange(n_events), sizes).astype(np.int64),
            chosen=np.asarray(chosen, dtype=np.int64),
            event_item=np.asarray(items, dtype=np.int64),
            event_t=np.asarray(times, dtype=np.int64),
            event_seq=np.asarray(seqs, dtype=np.int64),
            n_events=n_events,
        )

    def restrict(self, events: np.ndarray) -> "SelectionDesign":
        """Sub-design keeping the events selected by a boolean mask."""
        events = np.asarray(events, dtype=bool)
        keep_cells = events[self.cell_event]
        new_index = np.cumsum(events) - 1
        cell_index = np.cumsum(keep_cells) - 1
        chosen = self.chosen[events]
        chosen = np.where(chosen >= 0, cell_index[np.maximum(chosen, 0)], -1)
        return replace(
            self,
            log_rank=self.log_rank[keep_cells],
            counts=self.counts[keep_cells],
            cell_event=new_index[self.cell_event[keep_cells]],
            chosen=chosen,
            event_item=self.event_item[events],
            event_t=self.event_t[events],
            event_seq=self.event_seq[events],
            n_events=int(events.sum()),
        )

    def up_to_step(self, t: int) -> "SelectionDesign":
        return self.restrict(self.event_t <= t)

    @property
    def n_informative(self) -> int:
        """Events whose probabilities depend on τ."""
        if not self.n_events:
            return 0
        has_rank = np.bincount(self.cell_event, weights=self.log_rank > 0, minlength=self.n_events)
        return int(np.count_nonzero(has_rank))

    def _chosen_log_rank(self) -> np.ndarray:
        """log(1 + rank) of the selected response, 0 for writes."""
        out = np.zeros(self.n_events)
        is_vote = self.chosen >= 0
        out[is_vote] = self.log_rank[self.chosen[is_vote]]
        return out

    def _sums(self, tau: float, alpha: float) -> Tuple[np.ndarray, np.ndarray]:
        f = np.exp(-tau * self.log_rank)
        total = alpha + np.bincount(self.cell_event, weights=f, minlength=self.n_events)
        return f, total

    def event_logprob(self, tau: float, alpha: float) -> np.ndarray:
        """log p of the realized action of every event."""
        _, total = self._sums(tau, alpha)
        numerator = np.where(self.chosen >= 0, -tau * self._chosen_log_rank(), np.log(alpha))
        return numerator - np.log(total)

    def loglik(self, tau: float, alpha: float) -> float:
        return float(np.sum(self.event_logprob(tau, alpha)))

    def grad(self, tau: float, alpha: float) -> float:
        """dℓ_s/dτ in log-rank form, finite at τ = 0."""
        if not self.n_events:
            return 0.0
        f, total = self._sums(tau, alpha)
        weighted = np.bincount(self.cell_event, weights=f * self.log_rank, minlength=self.n_events)
        return float(np.sum(weighted / total - self._chosen_log_rank()))

    def curvature(self, tau: float, alpha: float) -> float:
        """d²ℓ_s/dτ², never positive."""
        if not self.n_events:
            return 0.0
        f, total = self._sums(tau, alpha)
        first = np.bincount(self.cell_event, weights=f * self.log_rank, minlength=self.n_events)
        second = np.bincount(self.cell_event, weights=f * self.log_rank ** 2,
                             minlength=self.n_events)
        return float(np.sum((first / total) ** 2 - second / total))

    def crp_event_logprob(self, alpha: float, literal: bool = False) -> np.ndarray:
        """log p of the realized action of every event under the CRP baseline."""
        weights = self.counts if literal else self.counts + 1.0
        total = alpha + np.bincount(self.cell_event, weights=weights, minlength=self.n_events)
        numerator = np.full(self.n_events, alpha, dtype=np.float64)
        is_vote = self.chosen >= 0
        numerator[is_vote] = weights[self.chosen[is_vote]]
        with np.errstate(divide="ignore"):
            return np.log(numerator) - np.log(total)


def selection_loglik(
    ds: Dataset,
    params: SelectionParams,
    rank_base: RankBase = RankBase.ZERO,
    design: Optional[SelectionDesign] = None,
) -> float:
    """
    Selection-phase log-likelihood ℓ_s.

    Writes contribute log p(write) and votes log p(select z), using the
    observed display orders. Each item's first event is forced and
    contributes nothing.

    Raises:
        MissingDisplayOrder: If an event after the first lacks a display order
    """
    if design is None:
        design = SelectionDesign.build(ds, rank_base)
    return design.loglik(params.tau, params.alpha)


def selection_grad_tau(
    ds: Dataset,
    params: SelectionParams,
    rank_base: RankBase = RankBase.ZERO,
    design: Optional[SelectionDesign] = None,
) -> float:
    """
    Derivative of ℓ_s with respect to τ.

    Per event: −1[choose]·log(1 + rank(z)) + Σ_j f_j log(1 + rank_j) / (α + Σ_j f_j).
    """
    if design is None:
        design = SelectionDesign.build(ds, rank_base)
    return design.grad(params.tau, params.alpha)


def crp_selection_loglik(
    ds: Dataset,
    alpha: float,
    literal: bool = False,
    design: Optional[SelectionDesign] = None,
) -> float:
    """Selection log-likelihood under the CRP baseline."""
    if design is None:
        design = SelectionDesign.build(ds, require_order=False)
    return float(np.sum(design.crp_event_logprob(alpha, literal)))


@dataclass(frozen=True)
class TauFit:
    """
    Result of the trendiness fit.

    Attributes:
        tau: Maximizer of ℓ_s (a bracket end when saturated)
        loglik: ℓ_s at tau
        grad: dℓ_s/dτ at tau
        n_events: Selection events used
        n_informative: Events whose probability depends on τ
        saturated: Whether tau sits on the search bracket
        iterations: Root-finder iterations
    """
    tau: float
    loglik: float
    grad: float
    n_events: int
    n_informative: int
    saturated: bool
    iterations: int

    def to_dict(self):
        return {
            "tau": self.tau,
            "loglik": self.loglik,
            "grad": self.grad,
            "n_events": self.n_events,
            "n_informative": self.n_informative,
            "saturated": self.saturated,
            "iterations": self.iterations,
        }


def fit_tau(
    ds: Optional[Dataset],
    alpha: float = 0.5,
    rank_base: RankBase = RankBase.ZERO,
    bracket: Tuple[float, float] = TAU_BRACKET,
    tol: float = 1e-8,
    design: Optional[SelectionDesign] = None,
) -> TauFit:
    """
    Fit trendiness τ by maximizing ℓ_s for fixed α.

    ℓ_s is concave in τ, so the maximizer is the root of its derivative;
    it is bracketed in ``bracket`` and located with Brent's method. When the
    derivative does not change sign the nearer bracket end is returned and
    flagged as saturated.

    Raises:
        Unidentifiable: If no event's probability depends on τ
    """
    SelectionParams(tau=0.0, alpha=alpha)
    if design is None:
        design = SelectionDesign.build(ds, rank_base)
    if design.n_informative == 0:
        raise Unidentifiable(
            f"no selection event among {design.n_events} carries information about tau"
        )

    lo, hi = bracket
    grad_lo = design.grad(lo, alpha)
    grad_hi = design.grad(hi, alpha)
    iterations = 0
    saturated = False
    if grad_lo <= 0.0:
        tau, saturated = lo, True
    elif grad_hi >= 0.0:
        tau, saturated = hi, True
    else:
        tau, info = brentq(lambda x: design.grad(x, alpha), lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps,
                           full_output=True)
        iterations = info.iterations

    if saturated:
        logger.warning(f"Trendiness saturated at the bracket end tau={tau:g}")

    fit = TauFit(
        tau=float(tau),
        loglik=design.loglik(tau, alpha),
        grad=design.grad(tau, alpha),
        n_events=design.n_events,
        n_informative=design.n_informative,
        saturated=saturated,
        iterations=iterations,
    )
    logger.info(f"Fitted tau={fit.tau:.6f} on {fit.n_events} selection events")
    return fit
