"""
Community-level analyses built on the fitted models.
"""

from chinese_voting.analysis.coefficients import (
    CoeffReport,
    CoeffRow,
    compute_coefficients,
    conformity,
    conformity_log_odds,
    kappa,
    majority_sign,
    trendiness,
)
from chinese_voting.analysis.evaluation import (
    EvalReport,
    ablation_grid,
    average_nll,
    cvp_model_name,
    predictive_nll,
)
from chinese_voting.analysis.quality import (
    QualityReport,
    RegressionFit,
    bin_average,
    bumpiness,
    effective_bin_size,
    final_ranks,
    merge_duplicate_x,
    quality_analysis,
    rank_zscore,
    regression_residual,
)

__all__ = [
    "CoeffReport",
    "CoeffRow",
    "compute_coefficients",
    "conformity",
    "conformity_log_odds",
    "kappa",
    "majority_sign",
    "trendiness",
    "EvalReport",
    "ablation_grid",
    "average_nll",
    "cvp_model_name",
    "predictive_nll",
    "QualityReport",
    "RegressionFit",
    "bin_average",
    "bumpiness",
    "effective_bin_size",
    "final_ranks",
    "merge_duplicate_x",
    "quality_analysis",
    "rank_zscore",
    "regression_residual",
]
