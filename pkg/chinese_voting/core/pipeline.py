"""
CommunityAnalyzer - the high-level interface of the library.

This module wires ingestion, filtering, model fitting, behavioral
coefficients, predictive evaluation and quality analysis together, and
publishes progress through the event emitter.
"""

import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

from chinese_voting.analysis.coefficients import (
    DEFAULT_FULL_REFIT_EVERY,
    DEFAULT_REFIT_STRIDE,
    CoeffReport,
    compute_coefficients,
)
from chinese_voting.analysis.evaluation import EvalReport, ablation_grid, predictive_nll
from chinese_voting.analysis.quality import (
    DEFAULT_BIN_SIZE,
    RESIDUAL_KINDS,
    QualityReport,
    quality_analysis,
)
from chinese_voting.core.errors import ConfigError, Unidentifiable
from chinese_voting.core.events import EventEmitter, EventType
from chinese_voting.core.trajectory import (
    Dataset,
    FilterReport,
    LineSource,
    UrnConfig,
    ingest_event_log,
    ingest_metadata,
    preprocess_filter,
    replay_dataset,
)
from chinese_voting.models.base import (
    FeatureGrouping,
    FeatureMask,
    FitOptions,
    FitResult,
    RankBase,
    SelectionParams,
    VotingParams,
)
from chinese_voting.models.selection import TauFit, fit_tau
from chinese_voting.models.voting import VotingDesign, fit_voting
from chinese_voting.simulation.simulator import GroundTruth, SimConfig, simulate_community

logger = logging.getLogger(__name__)

Source = Union[str, Path, LineSource]


@dataclass(frozen=True)
class AnalyzerConfig:
    """
    Configuration for the CommunityAnalyzer.

    Attributes:
        alpha: Write propensity of the selection models
        sigma2: Quality prior variance
        urn: Urn pseudo-votes and reinforcement
        ridge: Ridge weight on λ, μ and ν
        tol: Gradient-norm tolerance of the voting fit
        max_iters: Iteration cap of the voting fit
        exclude_first_vote: Drop each response's first vote from the voting fit
        min_item_votes: Items with fewer votes keep ν = 0
        knockout: Voting parameter groups pinned to 0
        rank_base: Rank convention of the popularity decay
        horizon: Last aligned event index predicted by the evaluation
        refit_stride: Votes between conformity refits
        full_refit_every: Votes between cold conformity refits
        include_first_kappa_vote: Score the community's first vote in κ
        bin_size: Responses per bin in the quality analysis
        residual: ``squared`` or ``absolute`` regression residual
        grouping: How the ablation grid toggles λ and μ
        crp_literal: CRP baseline without the writer pseudo-count
        min_responses: Items with fewer responses are dropped
        stitch_gap: Largest fragment gap that is stitched
        threads: Worker threads for replay and ablation variants
    """
    alpha: float = 0.5
    sigma2: float = 1.0
    urn: UrnConfig = field(default_factory=UrnConfig)
    ridge: float = 0.5
    tol: float = 1e-6
    max_iters: int = 500
    exclude_first_vote: bool = False
    min_item_votes: int = 3
    knockout: FeatureMask = field(default_factory=FeatureMask)
    rank_base: RankBase = RankBase.ZERO
    horizon: int = 50
    refit_stride: int = DEFAULT_REFIT_STRIDE
    full_refit_every: int = DEFAULT_FULL_REFIT_EVERY
    include_first_kappa_vote: bool = True
    bin_size: int = DEFAULT_BIN_SIZE
    residual: str = "squared"
    grouping: FeatureGrouping = FeatureGrouping.JOINT
    crp_literal: bool = False
    min_responses: int = 5
    stitch_gap: int = 3
    threads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Check every option against the preconditions of the modules using it."""
        SelectionParams(tau=0.0, alpha=self.alpha)
        self.fit_options  # FitOptions checks ridge, tol and max_iters
        if not self.sigma2 > 0:
            raise ConfigError(f"sigma2 must be positive, got {self.sigma2}")
        if self.horizon < 2:
            raise ConfigError(f"horizon must be >= 2, got {self.horizon}")
        if self.refit_stride < 1:
            raise ConfigError(f"refit_stride must be >= 1, got {self.refit_stride}")
        if self.full_refit_every < 1:
            raise ConfigError(f"full_refit_every must be >= 1, got {self.full_refit_every}")
        if self.bin_size < 1:
            raise ConfigError(f"bin_size must be >= 1, got {self.bin_size}")
        if self.residual not in RESIDUAL_KINDS:
            raise ConfigError(f"residual must be one of {RESIDUAL_KINDS}, got {self.residual!r}")
        if self.min_responses < 1:
            raise ConfigError(f"min_responses must be >= 1, got {self.min_responses}")
        if self.stitch_gap < 0:
            raise ConfigError(f"stitch_gap must be >= 0, got {self.stitch_gap}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")

    @property
    def fit_options(self) -> FitOptions:
        return FitOptions(
            ridge=self.ridge,
            tol=self.tol,
            max_iters=self.max_iters,
            exclude_first_vote=self.exclude_first_vote,
            min_item_votes=self.min_item_votes,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "sigma2": self.sigma2,
            "urn": self.urn.to_dict(),
            "ridge": self.ridge,
            "tol": self.tol,
            "max_iters": self.max_iters,
            "exclude_first_vote": self.exclude_first_vote,
            "min_item_votes": self.min_item_votes,
            "knockout": str(self.knockout),
            "rank_base": self.rank_base.value,
            "horizon": self.horizon,
            "refit_stride": self.refit_stride,
            "full_refit_every": self.full_refit_every,
            "include_first_kappa_vote": self.include_first_kappa_vote,
            "bin_size": self.bin_size,
            "residual": self.residual,
            "grouping": self.grouping.value,
            "crp_literal": self.crp_literal,
            "min_responses": self.min_responses,
            "stitch_gap": self.stitch_gap,
        }


class CommunityAnalyzer:
    """
    Main orchestrator for analyzing one community's vote trajectories.

    Example:
        from chinese_voting import AnalyzerConfig, CommunityAnalyzer

        analyzer = CommunityAnalyzer(AnalyzerConfig(alpha=0.5, horizon=50))
        dataset = analyzer.load("events.jsonl", community_id="stats")
        dataset, _ = analyzer.filter(dataset)

        fit, tau = analyzer.fit(dataset)
        coefficients = analyzer.coefficients(dataset)
        report = analyzer.evaluate(dataset, ablation=True)
    """

    def __init__(
        self,
        config: Optional[AnalyzerConfig] = None,
        event_emitter: Optional[EventEmitter] = None,
    ):
        """
        Initialize the CommunityAnalyzer.

        Args:
            config: Hyperparameters and options
            event_emitter: Event emitter for progress updates
        """
        self.config = config or AnalyzerConfig()
        self.event_emitter = event_emitter or EventEmitter()

    def _emit(self, community_id: str, event_type: EventType, data: Dict[str, Any]):
        self.event_emitter.emit_to_community(community_id, event_type, data)

    def _warn(self, community_id: str, message: str):
        logger.warning(message)
        self._emit(community_id, EventType.WARNING, {"message": message})

    # -------------------------------------------------------------------------
    # Data
    # -------------------------------------------------------------------------

    def load(
        self,
        events: Source,
        community_id: str = "community",
        metadata: Optional[Source] = None,
    ) -> Dataset:
        """
        Ingest an event log and, optionally, its metadata sidecar.

        Args:
            events: Path or line source of the event log
            community_id: Identifier of the community
            metadata: Path or line source of the metadata sidecar

        Returns:
            The validated dataset
        """
        ds = _ingest(events, lambda stream: ingest_event_log(stream, community_id))
        if metadata is not None:
            ds = _ingest(metadata, lambda stream: ingest_metadata(stream, ds))
        self._emit(community_id, EventType.INGEST_COMPLETED, ds.summary())
        return ds

    def filter(self, ds: Dataset) -> Tuple[Dataset, FilterReport]:
        """Drop thin items and stitch fragmented ones."""
        filtered, report = preprocess_filter(ds, self.config.min_responses, self.config.stitch_gap)
        if filtered.m == 0 and ds.m > 0:
            self._warn(ds.community_id, f"Filtering removed every item of {ds.community_id}")
        self._emit(ds.community_id, EventType.FILTER_APPLIED, report.to_dict())
        return filtered, report

    def simulate(self, sim_config: SimConfig) -> Tuple[Dataset, GroundTruth]:
        """Generate a synthetic community."""
        ds, truth = simulate_community(sim_config, threads=self.config.threads)
        self._emit(ds.community_id, EventType.INGEST_COMPLETED, ds.summary())
        return ds, truth

    # -------------------------------------------------------------------------
    # Models
    # -------------------------------------------------------------------------

    def fit(self, ds: Dataset, design: Optional[VotingDesign] = None
            ) -> Tuple[FitResult, Optional[TauFit]]:
        """
        Fit the voting parameters and the trendiness τ.

        τ is None, with a warning, when the data carries no information about it.
        """
        cfg = self.config
        self._emit(ds.community_id, EventType.FIT_STARTED, {
            "votes": ds.n_votes, "knockout": cfg.knockout.label,
        })
        if design is None:
            design = VotingDesign.build(ds, cfg.urn,
                                        states=replay_dataset(ds, cfg.urn, cfg.threads))
        result = fit_voting(ds, cfg.urn, knockout=cfg.knockout, options=cfg.fit_options,
                            sigma2=cfg.sigma2, design=design)
        self._emit(ds.community_id, EventType.FIT_COMPLETED, result.to_dict())

        tau: Optional[TauFit] = None
        try:
            tau = fit_tau(ds, alpha=cfg.alpha, rank_base=cfg.rank_base)
        except Unidentifiable as e:
            self._warn(ds.community_id, f"Trendiness not fitted: {e}")
        else:
            self._emit(ds.community_id, EventType.TAU_FITTED, tau.to_dict())
        return result, tau

    # -------------------------------------------------------------------------
    # Analyses
    # -------------------------------------------------------------------------

    def coefficients(self, ds: Dataset, by_group: bool = True) -> CoeffReport:
        """Trendiness and conformity of the community and its tagged groups."""
        cfg = self.config
        return compute_coefficients(
            ds,
            urn=cfg.urn,
            alpha=cfg.alpha,
            rank_base=cfg.rank_base,
            options=cfg.fit_options,
            sigma2=cfg.sigma2,
            refit_stride=cfg.refit_stride,
            full_refit_every=cfg.full_refit_every,
            include_first=cfg.include_first_kappa_vote,
            by_group=by_group,
            emitter=self.event_emitter,
        )

    def evaluate(self, ds: Dataset, ablation: bool = False) -> EvalReport:
        """Predictive NLL of the configured variant, or of the whole ablation grid."""
        cfg = self.config
        common = dict(
            horizon=cfg.horizon,
            urn=cfg.urn,
            alpha=cfg.alpha,
            rank_base=cfg.rank_base,
            options=cfg.fit_options,
            sigma2=cfg.sigma2,
            crp_literal=cfg.crp_literal,
            threads=cfg.threads,
            emitter=self.event_emitter,
        )
        if ablation:
            return ablation_grid(ds, grouping=cfg.grouping, **common)
        return predictive_nll(ds, knockout=cfg.knockout, **common)

    def quality(self, ds: Dataset, params: Optional[VotingParams] = None) -> QualityReport:
        """Ranking-versus-sentiment analysis, fitting the voting model first if needed."""
        if params is None:
            params = self.fit(ds)[0].params
        return quality_analysis(ds, params, bin_size=self.config.bin_size,
                                residual=self.config.residual)

    def with_config(self, **changes: Any) -> "CommunityAnalyzer":
        """A new analyzer sharing this one's emitter, with some options changed."""
        return CommunityAnalyzer(replace(self.config, **changes), self.event_emitter)


def _ingest(source: Source, read):
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            return read(f)
    return read(source)
