"""
Predictive next-action evaluation.

Items are aligned at their first event. For every aligned step t the models
are fitted on all events with index <= t and score each item's actual action
at t + 1: the selection phase (CVP rank decay vs. the CRP baseline) on every
event, the voting phase on votes only. Averages weight every predicted action
equally.

Example:
    report = ablation_grid(dataset, horizon=50)
    print(report.summary)
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import log_expit

from chinese_voting.core.errors import ConfigError, Unidentifiable
from chinese_voting.core.events import EventEmitter, EventType
from chinese_voting.core.trajectory import Dataset, UrnConfig, replay_dataset
from chinese_voting.models.base import FeatureGrouping, FeatureMask, FitOptions, RankBase
from chinese_voting.models.selection import SelectionDesign, fit_tau
from chinese_voting.models.voting import VotingDesign, fit_design

logger = logging.getLogger(__name__)

CRP_MODEL = "crp"
PER_STEP_COLUMNS = ["step", "model", "n_selection", "selection_nll", "n_voting", "voting_nll"]
SUMMARY_COLUMNS = [
    "model", "n_selection", "selection_nll", "n_voting", "voting_nll",
    "train_vote_loglik", "train_objective",
]


def average_nll(log_probs: Sequence[float]) -> float:
    """Mean negative log-probability of realized actions (NaN when empty)."""
    log_probs = np.asarray(log_probs, dtype=np.float64)
    if log_probs.size == 0:
        return float("nan")
    return float(-np.mean(log_probs))


def cvp_model_name(mask: FeatureMask) -> str:
    """``cvp`` for the full model, ``cvp-q-nu`` style for knockouts."""
    return "cvp" + "".join(f"-{group}" for group in str(mask).split(",") if group)


@dataclass
class EvalReport:
    """
    Predictive negative log-likelihoods.

    Attributes:
        horizon: Last aligned event index that was predicted
        per_step: One row per (step, model): counts and mean NLL of the
            actions at step + 1
        summary: One row per model, averaged over all predicted actions
    """
    horizon: int
    per_step: pd.DataFrame
    summary: pd.DataFrame

    def model(self, name: str) -> Dict[str, float]:
        """Summary row of one model as a dict."""
        rows = self.summary[self.summary["model"] == name]
        if rows.empty:
            raise KeyError(name)
        return rows.iloc[0].to_dict()


@dataclass
class _StepTotals:
    n: int = 0
    total: float = 0.0

    def add(self, log_probs: np.ndarray):
        self.n += int(log_probs.size)
        self.total -= float(np.sum(log_probs))

    @property
    def mean(self) -> float:
        return self.total / self.n if self.n else float("nan")


def _steps(horizon: int, ds: Dataset) -> range:
    if horizon < 2:
        raise ConfigError(f"horizon must be >= 2, got {horizon}")
    longest = max((item.T for item in ds.items), default=0)
    return range(1, min(horizon, longest))


def _selection_steps(
    design: SelectionDesign,
    steps: range,
    alpha: float,
    crp_literal: bool,
) -> Tuple[Dict[int, _StepTotals], Dict[int, _StepTotals]]:
    cvp: Dict[int, _StepTotals] = {}
    crp: Dict[int, _StepTotals] = {}
    for t in steps:
        target = design.restrict(design.event_t == t + 1)
        try:
            tau = fit_tau(None, alpha=alpha, design=design.up_to_step(t)).tau
        except Unidentifiable:
            tau = 0.0
        cvp[t] = _StepTotals()
        cvp[t].add(target.event_logprob(tau, alpha))
        crp[t] = _StepTotals()
        crp[t].add(target.crp_event_logprob(alpha, crp_literal))
    return cvp, crp


def _voting_steps(
    design: VotingDesign,
    steps: range,
    mask: FeatureMask,
    sigma2: float,
    options: FitOptions,
) -> Dict[int, _StepTotals]:
    totals: Dict[int, _StepTotals] = {}
    vec: Optional[np.ndarray] = None
    for t in steps:
        target = design.vote_t == t + 1
        totals[t] = _StepTotals()
        if not np.any(target):
            continue
        _, vec = fit_design(design.up_to_step(t), sigma2=sigma2, init=vec,
                            knockout=mask, options=options)
        eta = design.linear_predictor(vec)[target]
        totals[t].add(log_expit((2.0 * design.y[target] - 1.0) * eta))
    return totals


def _frames(
    steps: range,
    cvp_sel: Dict[int, _StepTotals],
    crp_sel: Dict[int, _StepTotals],
    voting: Dict[FeatureMask, Dict[int, _StepTotals]],
    training: Dict[FeatureMask, Tuple[float, float]],
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    per_step: List[dict] = []
    summary: List[dict] = []

    for mask, totals in voting.items():
        name = cvp_model_name(mask)
        sel_all, vote_all = _StepTotals(), _StepTotals()
        for t in steps:
            per_step.append({
                "step": t, "model": name,
                "n_selection": cvp_sel[t].n, "selection_nll": cvp_sel[t].mean,
                "n_voting": totals[t].n, "voting_nll": totals[t].mean,
            })
            sel_all.n += cvp_sel[t].n
            sel_all.total += cvp_sel[t].total
            vote_all.n += totals[t].n
            vote_all.total += totals[t].total
        vote_ll, objective = training[mask]
        summary.append({
            "model": name,
            "n_selection": sel_all.n, "selection_nll": sel_all.mean,
            "n_voting": vote_all.n, "voting_nll": vote_all.mean,
            "train_vote_loglik": vote_ll, "train_objective": objective,
        })

    crp_all = _StepTotals()
    for t in steps:
        per_step.append({
            "step": t, "model": CRP_MODEL,
            "n_selection": crp_sel[t].n, "selection_nll": crp_sel[t].mean,
            "n_voting": 0, "voting_nll": float("nan"),
        })
        crp_all.n += crp_sel[t].n
        crp_all.total += crp_sel[t].total
    summary.append({
        "model": CRP_MODEL,
        "n_selection": crp_all.n, "selection_nll": crp_all.mean,
        "n_voting": 0, "voting_nll": float("nan"),
        "train_vote_loglik": float("nan"), "train_objective": float("nan"),
    })

    per_step_frame = pd.DataFrame(per_step, columns=PER_STEP_COLUMNS)
    per_step_frame = per_step_frame.sort_values(["step", "model"], kind="mergesort")
    return per_step_frame.reset_index(drop=True), pd.DataFrame(summary, columns=SUMMARY_COLUMNS)


def _evaluate(
    ds: Dataset,
    masks: List[FeatureMask],
    horizon: int,
    urn: UrnConfig,
    alpha: float,
    rank_base: RankBase,
    options: FitOptions,
    sigma2: float,
    crp_literal: bool,
    threads: int,
    emitter: Optional[EventEmitter],
) -> EvalReport:
    steps = _steps(horizon, ds)
    states = replay_dataset(ds, urn, threads=threads)
    voting_design = VotingDesign.build(ds, urn, states=states)
    selection_design = SelectionDesign.build(ds, rank_base, states=states)
    logger.info(
        f"Evaluating {len(masks)} voting variants of {ds.community_id} over {len(steps)} steps"
    )

    cvp_sel, crp_sel = _selection_steps(selection_design, steps, alpha, crp_literal)

    def run(mask: FeatureMask):
        totals = _voting_steps(voting_design, steps, mask, sigma2, options)
        trained, _ = fit_design(voting_design, sigma2=sigma2, knockout=mask, options=options)
        return totals, (trained.vote_loglik, trained.objective)

    if threads <= 1 or len(masks) == 1:
        results = [run(mask) for mask in masks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, masks))

    voting = {mask: totals for mask, (totals, _) in zip(masks, results)}
    training = {mask: train for mask, (_, train) in zip(masks, results)}
    per_step, summary = _frames(steps, cvp_sel, crp_sel, voting, training)

    if emitter is not None:
        for row in per_step.to_dict("records"):
            emitter.emit_to_community(ds.community_id, EventType.EVAL_STEP, row)
    horizon_used = steps.stop if len(steps) else 1
    return EvalReport(horizon=horizon_used, per_step=per_step, summary=summary)


def predictive_nll(
    ds: Dataset,
    knockout: FeatureMask = FeatureMask(),
    horizon: int = 50,
    urn: UrnConfig = UrnConfig(),
    alpha: float = 0.5,
    rank_base: RankBase = RankBase.ZERO,
    options: FitOptions = FitOptions(),
    sigma2: float = 1.0,
    crp_literal: bool = False,
    threads: int = 1,
    emitter: Optional[EventEmitter] = None,
) -> EvalReport:
    """
    Next-action negative log-likelihood of one CVP variant and the CRP baseline.

    For each aligned step t < horizon, τ and the voting parameters are fitted
    on every event with index <= t (voting fits warm-start from step t − 1)
    and score the actions at t + 1. When τ is not identifiable yet it is
    taken as 0. Responses and items not seen in training score with q = 0
    and ν = 0.

    Args:
        ds: Dataset to evaluate
        knockout: Voting parameter groups pinned to 0
        horizon: Last aligned event index to predict
        urn: Urn configuration of the ratio features
        alpha: Write propensity of both selection models
        rank_base: Rank convention of the popularity decay
        options: Voting fit options
        sigma2: Quality prior variance
        crp_literal: CRP baseline without the writer pseudo-count

    Returns:
        EvalReport with rows for ``cvp`` (or ``cvp-...``) and ``crp``
    """
    return _evaluate(ds, [knockout], horizon, urn, alpha, rank_base, options, sigma2,
                     crp_literal, threads, emitter)


def ablation_grid(
    ds: Dataset,
    horizon: int = 50,
    grouping: FeatureGrouping = FeatureGrouping.JOINT,
    urn: UrnConfig = UrnConfig(),
    alpha: float = 0.5,
    rank_base: RankBase = RankBase.ZERO,
    options: FitOptions = FitOptions(),
    sigma2: float = 1.0,
    crp_literal: bool = False,
    threads: int = 1,
    emitter: Optional[EventEmitter] = None,
) -> EvalReport:
    """
    Predictive evaluation of every knockout subset plus the CRP baseline.

    The summary has 2^k + 1 rows for the k groups of ``grouping`` and also
    reports each variant's training ℓ_v on the whole dataset.
    """
    masks = FeatureMask.grid(grouping)
    return _evaluate(ds, masks, horizon, urn, alpha, rank_base, options, sigma2,
                     crp_literal, threads, emitter)
