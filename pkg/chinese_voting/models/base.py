"""
Parameter containers shared by the selection and voting models.
"""

from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations
from numbers import Real
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

import numpy as np

from chinese_voting.core.errors import ConfigError

ResponseKey = Tuple[str, int]


class ParamGroup(str, Enum):
    """Parameter groups of the voting model that can be knocked out."""
    QUALITY = "q"
    LAMBDA = "lambda"
    MU = "mu"
    NU = "nu"


class FeatureGrouping(str, Enum):
    """How the ablation grid toggles λ and μ."""
    JOINT = "joint"
    SEPARATE = "separate"

    def groups(self) -> List[FrozenSet[ParamGroup]]:
        if self == FeatureGrouping.JOINT:
            return [
                frozenset({ParamGroup.QUALITY}),
                frozenset({ParamGroup.LAMBDA, ParamGroup.MU}),
                frozenset({ParamGroup.NU}),
            ]
        return [frozenset({g}) for g in ParamGroup]


@dataclass(frozen=True)
class FeatureMask:
    """
    Set of knocked-out parameter groups; knocked-out parameters are pinned to 0.

    Example:
        FeatureMask.parse("lambda,mu")   # keep only q and nu
        FeatureMask.none()               # the full model
    """
    knocked_out: FrozenSet[ParamGroup] = frozenset()

    @classmethod
    def none(cls) -> "FeatureMask":
        return cls(frozenset())

    @classmethod
    def all(cls) -> "FeatureMask":
        return cls(frozenset(ParamGroup))

    @classmethod
    def parse(cls, text: Optional[str]) -> "FeatureMask":
        """Parse a ``--knockout`` value such as ``"q,lambda"``."""
        if not text:
            return cls.none()
        groups = set()
        for token in text.split(","):
            token = token.strip().lower()
            if not token:
                continue
            try:
                groups.add(ParamGroup(token))
            except ValueError:
                valid = ", ".join(g.value for g in ParamGroup)
                raise ConfigError(f"unknown knockout group {token!r} (expected {valid})") from None
        return cls(frozenset(groups))

    def active(self, group: ParamGroup) -> bool:
        return group not in self.knocked_out

    @property
    def label(self) -> str:
        """Stable label: ``full``, ``none`` or ``-q-lambda`` style."""
        if not self.knocked_out:
            return "full"
        if self.knocked_out == frozenset(ParamGroup):
            return "none"
        order = list(ParamGroup)
        return "".join(f"-{g.value}" for g in sorted(self.knocked_out, key=order.index))

    def __str__(self) -> str:
        order = list(ParamGroup)
        return ",".join(g.value for g in sorted(self.knocked_out, key=order.index))

    @staticmethod
    def grid(grouping: FeatureGrouping = FeatureGrouping.JOINT) -> List["FeatureMask"]:
        """Every knockout subset of the groups, from the full model to the empty one."""
        groups = grouping.groups()
        masks = []
        for size in range(len(groups) + 1):
            for chosen in combinations(groups, size):
                knocked = frozenset().union(*chosen) if chosen else frozenset()
                masks.append(FeatureMask(knocked))
        return masks


class RankBase(str, Enum):
    """Which rank enters ``1 + rank`` in the popularity function."""
    ZERO = "zero"
    ONE = "one"

    def internal(self, display_rank):
        """Map 1-based display ranks to the rank used inside the decay."""
        return display_rank - 1 if self == RankBase.ZERO else display_rank


@dataclass(frozen=True)
class SelectionParams:
    """
    Selection-phase parameters.

    Attributes:
        tau: Trendiness, the exponent of the rank decay (may be negative)
        alpha: Propensity to write a new response
    """
    tau: float = 0.0
    alpha: float = 0.5

    def __post_init__(self):
        for name in ("tau", "alpha"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, Real):
                raise ConfigError(f"{name} must be a real number, got {value!r}")
        if not np.isfinite(self.alpha) or self.alpha <= 0:
            raise ConfigError(f"alpha must be a positive real, got {self.alpha}")
        if not np.isfinite(self.tau):
            raise ConfigError(f"tau must be finite, got {self.tau}")


@dataclass
class VotingParams:
    """
    Voting-phase parameters.

    Attributes:
        lam: Community preference for the positive urn ratio
        mu: Community preference for the negative urn ratio
        nu: Per-item length bias
        quality: Intrinsic quality per (item_id, response)
        sigma2: Variance of the Gaussian quality prior
    """
    lam: float = 0.0
    mu: float = 0.0
    nu: Dict[str, float] = field(default_factory=dict)
    quality: Dict[ResponseKey, float] = field(default_factory=dict)
    sigma2: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.sigma2) or self.sigma2 <= 0:
            raise ConfigError(f"sigma2 must be a positive real, got {self.sigma2}")

    @classmethod
    def zeros(cls, item_sizes: Iterable[Tuple[str, int]], sigma2: float = 1.0) -> "VotingParams":
        """All-zero parameters for items given as (item_id, response count)."""
        nu: Dict[str, float] = {}
        quality: Dict[ResponseKey, float] = {}
        for item_id, n_responses in item_sizes:
            nu[item_id] = 0.0
            for j in range(n_responses):
                quality[(item_id, j)] = 0.0
        return cls(nu=nu, quality=quality, sigma2=sigma2)

    def copy(self) -> "VotingParams":
        return replace(self, nu=dict(self.nu), quality=dict(self.quality))

    def flipped(self) -> "VotingParams":
        """Parameters of the polarity-flipped model: λ and μ swapped and negated, q negated."""
        return replace(
            self,
            lam=-self.mu,
            mu=-self.lam,
            nu={k: -v for k, v in self.nu.items()},
            quality={k: -v for k, v in self.quality.items()},
        )


@dataclass(frozen=True)
class FitOptions:
    """
    Options for the voting-phase fit.

    Attributes:
        ridge: Weight of the ridge penalty on λ, μ and every ν
        tol: Convergence threshold on the gradient norm
        max_iters: Iteration cap for the optimizer
        exclude_first_vote: Drop each response's first vote from the objective
        min_item_votes: Items with fewer votes keep ν pinned to 0
    """
    ridge: float = 0.5
    tol: float = 1e-6
    max_iters: int = 500
    exclude_first_vote: bool = False
    min_item_votes: int = 3

    def __post_init__(self):
        if self.ridge < 0 or not np.isfinite(self.ridge):
            raise ConfigError(f"ridge must be a non-negative real, got {self.ridge}")
        if self.tol <= 0:
            raise ConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ConfigError(f"max_iters must be >= 1, got {self.max_iters}")


@dataclass(frozen=True)
class FitResult:
    """
    Fitted voting parameters with optimizer diagnostics.

    Attributes:
        params: Fitted parameters
        final_loglik: ℓ_v at the optimum (Gaussian write terms included when q is active)
        vote_loglik: Sum of log p(v) over the training votes
        objective: The penalized objective that was maximized
        grad_norm: Euclidean norm of the objective gradient at the optimum
        iterations: Optimizer iterations used
        converged: Whether grad_norm reached the tolerance
        mask: Knocked-out parameter groups
        n_votes: Votes in the training objective
    """
    params: VotingParams
    final_loglik: float
    vote_loglik: float
    objective: float
    grad_norm: float
    iterations: int
    converged: bool
    mask: FeatureMask = FeatureMask()
    n_votes: int = 0

    def to_dict(self):
        return {
            "mask": self.mask.label,
            "final_loglik": self.final_loglik,
            "vote_loglik": self.vote_loglik,
            "objective": self.objective,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "n_votes": self.n_votes,
            "lambda": self.params.lam,
            "mu": self.params.mu,
        }
