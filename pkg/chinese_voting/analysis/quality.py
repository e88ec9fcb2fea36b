"""
Final-snapshot quality analysis.

Responses are ranked two ways, by their final display rank and by fitted
quality, and each ranking is compared with the responses' comment sentiment:
a ranking that reflects quality should relate to sentiment along a smooth
line (small regression residual, small bumpiness).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.stats import linregress

from chinese_voting.core.errors import (
    ConfigError,
    DegenerateX,
    DuplicateX,
    MissingMetadata,
    TooShort,
    UnknownItem,
    ZeroVariance,
)
from chinese_voting.core.trajectory import Dataset, ItemTrajectory
from chinese_voting.models.base import VotingParams

logger = logging.getLogger(__name__)

DEFAULT_BIN_SIZE = 1000
RESIDUAL_KINDS = ("squared", "absolute")
RANKINGS = ("display", "quality")


def rank_zscore(values: Sequence[float]) -> np.ndarray:
    """
    Standardize values with the population standard deviation.

    Raises:
        TooShort: Fewer than two values
        ZeroVariance: All values equal
    """
    values = np.asarray(values, dtype=np.float64)
    if values.size < 2:
        raise TooShort(f"z-scores need at least 2 values, got {values.size}")
    sd = values.std()
    if not sd > 0:
        raise ZeroVariance("cannot standardize constant values")
    return (values - values.mean()) / sd


def bin_average(scores: Sequence[float], values: Sequence[float], bin_size: int) -> pd.DataFrame:
    """
    Average consecutive rows in score order.

    Rows are sorted by score (stably) and cut into contiguous bins of
    ``bin_size``; the last bin may be short.

    Returns:
        DataFrame with columns ``score``, ``value`` and ``count``
    """
    if bin_size < 1:
        raise ConfigError(f"bin_size must be >= 1, got {bin_size}")
    scores = np.asarray(scores, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(scores, kind="stable")
    bins = np.arange(scores.size) // bin_size
    frame = pd.DataFrame({"bin": bins, "score": scores[order], "value": values[order]})
    grouped = frame.groupby("bin", sort=True)
    return pd.DataFrame({
        "score": grouped["score"].mean(),
        "value": grouped["value"].mean(),
        "count": grouped["score"].size(),
    }).reset_index(drop=True)


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares line and the spread of the points around it."""
    slope: float
    intercept: float
    residual: float


def regression_residual(
    x: Sequence[float], y: Sequence[float], kind: str = "squared"
) -> RegressionFit:
    """
    Ordinary least squares of y on x.

    Args:
        x, y: Point coordinates
        kind: ``"squared"`` for the mean squared deviation from the line,
            ``"absolute"`` for the mean absolute deviation

    Raises:
        TooShort: Fewer than three points
        DegenerateX: All x equal
    """
    if kind not in RESIDUAL_KINDS:
        raise ConfigError(f"residual must be one of {RESIDUAL_KINDS}, got {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise TooShort(f"regression needs at least 3 points, got {x.size}")
    if np.all(x == x[0]):
        raise DegenerateX("all x values are equal")
    fit = linregress(x, y)
    deviation = y - (fit.intercept + fit.slope * x)
    residual = np.mean(deviation ** 2) if kind == "squared" else np.mean(np.abs(deviation))
    return RegressionFit(slope=float(fit.slope), intercept=float(fit.intercept),
                         residual=float(residual))


def bumpiness(x: Sequence[float], y: Sequence[float]) -> float:
    """
    Mean absolute change between consecutive segment slopes.

    Raises:
        TooShort: Fewer than three points
        DuplicateX: Two consecutive points share an x value
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size < 3:
        raise TooShort(f"bumpiness needs at least 3 points, got {x.size}")
    dx = np.diff(x)
    if np.any(dx == 0):
        raise DuplicateX("consecutive points share an x value")
    slopes = np.diff(y) / dx
    return float(np.mean(np.abs(np.diff(slopes))))


def final_ranks(item: ItemTrajectory) -> np.ndarray:
    """
    1-based display rank of every response after the item's last event.

    Uses the latest recorded display order; responses written after it are
    placed below, in write order.
    """
    ranks = np.zeros(item.J_final, dtype=np.int64)
    latest: Tuple[int, ...] = ()
    for event in reversed(item.events):
        if event.display_order is not None:
            latest = event.display_order
            break
    ranks[list(latest)] = np.arange(1, len(latest) + 1)
    unranked = np.flatnonzero(ranks == 0)
    ranks[unranked] = np.arange(len(latest) + 1, len(latest) + 1 + unranked.size)
    return ranks


def effective_bin_size(n_rows: int, bin_size: int = DEFAULT_BIN_SIZE) -> int:
    """``bin_size``, shrunk to ceil(N/20) when N < 3 * bin_size."""
    if bin_size < 1:
        raise ConfigError(f"bin_size must be >= 1, got {bin_size}")
    if n_rows < 3 * bin_size:
        return max(1, int(np.ceil(n_rows / 20)))
    return bin_size


def merge_duplicate_x(points: pd.DataFrame) -> pd.DataFrame:
    """Collapse points sharing a score into their count-weighted mean."""
    weighted = points.assign(weighted=points["value"] * points["count"])
    grouped = weighted.groupby("score", sort=True)
    merged = pd.DataFrame({
        "count": grouped["count"].sum(),
        "weighted": grouped["weighted"].sum(),
    }).reset_index()
    merged["value"] = merged["weighted"] / merged["count"]
    return merged[["score", "value", "count"]]


@dataclass
class QualityReport:
    """
    Ranking-versus-sentiment analysis.

    Attributes:
        rows: One row per response with metadata: item_id, response,
            display_rank, display_rank_z, quality, quality_z, comment_count,
            avg_sentiment
        curves: Binned (score, value, count) points per ranking and metric
        summary: Slope, intercept, residual and bumpiness per ranking and metric
        bin_size: Bin size from the response count; each curve may shrink it
            further (summary column ``bin_size``)
    """
    rows: pd.DataFrame
    curves: pd.DataFrame
    summary: pd.DataFrame
    bin_size: int

    def metric(self, ranking: str, metric: str = "sentiment") -> Dict[str, float]:
        match = self.summary[(self.summary["ranking"] == ranking)
                             & (self.summary["metric"] == metric)]
        if match.empty:
            raise KeyError((ranking, metric))
        return match.iloc[0].to_dict()


def _response_rows(ds: Dataset, params: VotingParams) -> pd.DataFrame:
    records: List[dict] = []
    for item in ds.items:
        keys = [(item.item_id, j) for j in range(item.J_final)]
        if not any(key in ds.metadata for key in keys):
            continue
        ranks = final_ranks(item)
        # Higher is better, as for quality.
        if item.J_final >= 2:
            rank_z = rank_zscore(-ranks.astype(np.float64))
        else:
            rank_z = np.zeros(1)
        for j, key in enumerate(keys):
            meta = ds.metadata.get(key)
            if meta is None:
                continue
            if key not in params.quality:
                raise UnknownItem(f"no fitted quality for response {j}", item_id=item.item_id)
            records.append({
                "item_id": item.item_id,
                "response": j,
                "display_rank": int(ranks[j]),
                "display_rank_z": float(rank_z[j]),
                "quality": params.quality[key],
                "comment_count": meta.comment_count,
                "avg_sentiment": meta.avg_sentiment if meta.avg_sentiment is not None
                else float("nan"),
            })
    return pd.DataFrame(records, columns=[
        "item_id", "response", "display_rank", "display_rank_z", "quality",
        "comment_count", "avg_sentiment",
    ])


def _binned_curve(
    scores: pd.Series, values: pd.Series, bin_size: int
) -> Tuple[pd.DataFrame, int]:
    """Bin one curve, halving the bin size until three distinct scores remain."""
    size = effective_bin_size(len(scores), bin_size)
    points = bin_average(scores, values, size)
    while size > 1 and len(merge_duplicate_x(points)) < 3:
        size = max(1, size // 2)
        points = bin_average(scores, values, size)
    return points, size


def _curve_metrics(points: pd.DataFrame, residual: str, label: str) -> Dict[str, float]:
    merged = merge_duplicate_x(points)
    nan = float("nan")
    if len(points) >= 3 and np.ptp(points["score"].to_numpy()) > 0:
        fit = regression_residual(points["score"], points["value"], residual)
        slope, intercept, error = fit.slope, fit.intercept, fit.residual
    else:
        logger.warning(f"Curve {label} has {len(points)} bins without enough spread; "
                       f"regression reported as NaN")
        slope = intercept = error = nan
    if len(merged) >= 3:
        bump = bumpiness(merged["score"], merged["value"])
    else:
        logger.warning(f"Curve {label} has {len(merged)} distinct scores; "
                       f"bumpiness reported as NaN")
        bump = nan
    return {
        "slope": slope,
        "intercept": intercept,
        "residual": error,
        "bumpiness": bump,
        "n_bins": int(len(points)),
    }


def quality_analysis(
    ds: Dataset,
    params: VotingParams,
    bin_size: int = DEFAULT_BIN_SIZE,
    residual: str = "squared",
) -> QualityReport:
    """
    Compare display-rank and quality rankings against comment sentiment.

    display_rank_z is the within-item z-score of the negated final display
    rank (single-response items get 0); quality_z is the fitted q z-scored
    over every reported response of the community. Both rankings are binned
    against average sentiment and against comment count.

    Args:
        ds: Dataset with a metadata sidecar
        params: Fitted voting parameters covering every response with metadata
        bin_size: Responses per bin before automatic shrinking
        residual: ``"squared"`` or ``"absolute"`` regression residual

    Raises:
        MissingMetadata: If no response carries metadata, or none has sentiment
    """
    if residual not in RESIDUAL_KINDS:
        raise ConfigError(f"residual must be one of {RESIDUAL_KINDS}, got {residual!r}")
    if not ds.metadata:
        raise MissingMetadata("quality analysis needs the per-response metadata sidecar")

    rows = _response_rows(ds, params)
    rows.insert(5, "quality_z", rank_zscore(rows["quality"].to_numpy()))
    with_sentiment = rows[rows["avg_sentiment"].notna()]
    if with_sentiment.empty:
        raise MissingMetadata("no response carries an average sentiment")

    size = effective_bin_size(len(rows), bin_size)
    curves: List[pd.DataFrame] = []
    summary: List[dict] = []
    sources = {"sentiment": (with_sentiment, "avg_sentiment"), "comments": (rows, "comment_count")}
    for ranking in RANKINGS:
        column = "display_rank_z" if ranking == "display" else "quality_z"
        for metric, (frame, value_column) in sources.items():
            points, curve_size = _binned_curve(frame[column],
                                               frame[value_column].astype(np.float64), bin_size)
            curves.append(points.assign(ranking=ranking, metric=metric,
                                        bin=np.arange(len(points))))
            summary.append({"ranking": ranking, "metric": metric,
                            **_curve_metrics(points, residual, f"{ranking}/{metric}"),
                            "bin_size": curve_size})

    curve_frame = pd.concat(curves, ignore_index=True)[
        ["ranking", "metric", "bin", "score", "value", "count"]
    ]
    summary_frame = pd.DataFrame(summary, columns=[
        "ranking", "metric", "slope", "intercept", "residual", "bumpiness", "n_bins", "bin_size",
    ])
    display = summary_frame.iloc[0]
    quality = summary_frame.iloc[2]
    logger.info(
        f"Quality analysis of {ds.community_id} on {len(rows)} responses (bin size {size}): "
        f"residual display={display['residual']:.4f} quality={quality['residual']:.4f}"
    )
    return QualityReport(rows=rows, curves=curve_frame, summary=summary_frame, bin_size=size)
