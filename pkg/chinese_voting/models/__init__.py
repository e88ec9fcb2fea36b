"""
Selection and voting models of the Chinese Voting Process.
"""

from chinese_voting.models.base import (
    FeatureGrouping,
    FeatureMask,
    FitOptions,
    FitResult,
    ParamGroup,
    RankBase,
    SelectionParams,
    VotingParams,
)
from chinese_voting.models.selection import (
    SelectionDesign,
    TauFit,
    crp_selection_distribution,
    crp_selection_loglik,
    fit_tau,
    popularity,
    selection_distribution,
    selection_grad_tau,
    selection_loglik,
)
from chinese_voting.models.voting import (
    ToyFit,
    VotingDesign,
    VotingObjective,
    fit_design,
    fit_toy_response,
    fit_voting,
    polarity_score,
    toy_quality_trajectory,
    urn_ratio_gains,
    vote_probability,
    voting_loglik,
)

__all__ = [
    "FeatureGrouping",
    "FeatureMask",
    "FitOptions",
    "FitResult",
    "ParamGroup",
    "RankBase",
    "SelectionParams",
    "VotingParams",
    "SelectionDesign",
    "TauFit",
    "crp_selection_distribution",
    "crp_selection_loglik",
    "fit_tau",
    "popularity",
    "selection_distribution",
    "selection_grad_tau",
    "selection_loglik",
    "ToyFit",
    "VotingDesign",
    "VotingObjective",
    "fit_design",
    "fit_toy_response",
    "fit_voting",
    "polarity_score",
    "toy_quality_trajectory",
    "urn_ratio_gains",
    "vote_probability",
    "voting_loglik",
]
