"""
Voting phase of the Chinese Voting Process.

A user who selected response j of item i votes positively with probability
logit^-1(q_ij + g), where g = λ r + μ s + ν_i u combines the Pólya urn
ratios with the response's relative length. Fitting maximizes the voting
log-likelihood with a Gaussian prior on every q (acting as ℓ2 regularization)
and a ridge penalty on λ, μ and ν.

Example:
    result = fit_voting(dataset, UrnConfig(), knockout=FeatureMask.parse("nu"))
    print(result.params.lam, result.params.mu, result.converged)
"""

import logging
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import expit, log_expit
from scipy.stats import norm

from chinese_voting.core.errors import NonFinite, TooShort, UnknownItem
from chinese_voting.core.trajectory import (
    Dataset,
    ItemState,
    StateTracker,
    UrnConfig,
    replay_dataset,
)
from chinese_voting.models.base import (
    FeatureMask,
    FitOptions,
    FitResult,
    ParamGroup,
    ResponseKey,
    VotingParams,
)

logger = logging.getLogger(__name__)

# Offsets of the community scalars in the packed parameter vector.
LAM, MU, NU0 = 0, 1, 2


def polarity_score(state: ItemState, j: int, params: VotingParams, item_id: str) -> float:
    """
    Presentation score g = λ r_j + μ s_j + ν_i u_j.

    Raises:
        UnknownItem: If no ν is known for ``item_id``
    """
    if item_id not in params.nu:
        raise UnknownItem("no length bias fitted for this item", item_id=item_id, t=state.t)
    return float(
        params.lam * state.ratio_pos[j]
        + params.mu * state.ratio_neg[j]
        + params.nu[item_id] * state.rel_length[j]
    )


def vote_probability(q: float, g: float) -> float:
    """Probability of a positive vote, logit^-1(q + g), stable for large |q + g|."""
    return float(expit(q + g))


@dataclass(frozen=True)
class VotingDesign:
    """
    Flattened voting data of a dataset.

    Every vote becomes one row of features taken from the state before the
    vote; every write becomes one prior row. Parameters are packed as
    ``[λ, μ, ν_0..ν_{m-1}, q_0..q_{N-1}]``.

    Attributes:
        item_ids: Items in dataset order
        response_keys: (item_id, response) for every response, item-major
        vote_resp: Global response index of each vote
        vote_item: Item index of each vote
        r, s, u: Urn ratios and relative length before each vote
        y: Vote polarities
        n_pos, n_neg: Vote counts of the voted response before each vote
        first_vote: Whether the vote is its response's first
        vote_t, vote_seq: Within-item index and community clock of each vote
        write_resp, write_t, write_seq: The same for writes
    """
    item_ids: Tuple[str, ...]
    response_keys: Tuple[ResponseKey, ...]
    vote_resp: np.ndarray
    vote_item: np.ndarray
    r: np.ndarray
    s: np.ndarray
    u: np.ndarray
    y: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray
    first_vote: np.ndarray
    vote_t: np.ndarray
    vote_seq: np.ndarray
    write_resp: np.ndarray
    write_t: np.ndarray
    write_seq: np.ndarray

    @classmethod
    def build(cls, ds: Dataset, urn: UrnConfig, threads: int = 1,
              states: Optional[List[List[ItemState]]] = None) -> "VotingDesign":
        """Replay ``ds`` and collect one row per vote and per write."""
        if states is None:
            states = replay_dataset(ds, urn, threads=threads)
        keys: List[ResponseKey] = []
        votes: Dict[str, list] = {name: [] for name in (
            "resp", "item", "r", "s", "u", "y", "n_pos", "n_neg", "first", "t", "seq")}
        writes: Dict[str, list] = {"resp": [], "t": [], "seq": []}

        for i, (item, item_states) in enumerate(zip(ds.items, states)):
            offset = len(keys)
            for event, state in zip(item.events, item_states):
                if event.is_write:
                    writes["resp"].append(offset + state.J)
                    writes["t"].append(event.t)
                    writes["seq"].append(event.seq)
                    continue
                z = event.response
                votes["resp"].append(offset + z)
                votes["item"].append(i)
                votes["r"].append(state.ratio_pos[z])
                votes["s"].append(state.ratio_neg[z])
                votes["u"].append(state.rel_length[z])
                votes["y"].append(event.polarity)
                votes["n_pos"].append(state.pos_votes[z])
                votes["n_neg"].append(state.neg_votes[z])
                votes["first"].append(state.pos_votes[z] + state.neg_votes[z] == 0)
                votes["t"].append(event.t)
                votes["seq"].append(event.seq)
            keys.extend((item.item_id, j) for j in range(item.J_final))

        def ints(values):
            return np.asarray(values, dtype=np.int64)

        def reals(values):
            return np.asarray(values, dtype=np.float64)

        return cls(
            item_ids=tuple(item.item_id for item in ds.items),
            response_keys=tuple(keys),
            vote_resp=ints(votes["resp"]),
            vote_item=ints(votes["item"]),
            r=reals(votes["r"]),
            s=reals(votes["s"]),
            u=reals(votes["u"]),
            y=reals(votes["y"]),
            n_pos=ints(votes["n_pos"]),
            n_neg=ints(votes["n_neg"]),
            first_vote=np.asarray(votes["first"], dtype=bool),
            vote_t=ints(votes["t"]),
            vote_seq=ints(votes["seq"]),
            write_resp=ints(writes["resp"]),
            write_t=ints(writes["t"]),
            write_seq=ints(writes["seq"]),
        )

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_responses(self) -> int:
        return len(self.response_keys)

    @property
    def n_params(self) -> int:
        return NU0 + self.n_items + self.n_responses

    @property
    def n_votes(self) -> int:
        return int(self.y.shape[0])

    def restrict(self, vote_rows: np.ndarray, write_rows: np.ndarray) -> "VotingDesign":
        """Sub-design keeping the selected rows and the full parameter space."""
        return replace(
            self,
            vote_resp=self.vote_resp[vote_rows],
            vote_item=self.vote_item[vote_rows],
            r=self.r[vote_rows],
            s=self.s[vote_rows],
            u=self.u[vote_rows],
            y=self.y[vote_rows],
            n_pos=self.n_pos[vote_rows],
            n_neg=self.n_neg[vote_rows],
            first_vote=self.first_vote[vote_rows],
            vote_t=self.vote_t[vote_rows],
            vote_seq=self.vote_seq[vote_rows],
            write_resp=self.write_resp[write_rows],
            write_t=self.write_t[write_rows],
            write_seq=self.write_seq[write_rows],
        )

    def up_to_step(self, t: int) -> "VotingDesign":
        """Rows whose within-item event index is at most ``t``."""
        return self.restrict(self.vote_t <= t, self.write_t <= t)

    def before_seq(self, seq: int) -> "VotingDesign":
        """Rows strictly earlier than ``seq`` on the community clock."""
        return self.restrict(self.vote_seq < seq, self.write_seq < seq)

    def pack(self, params: VotingParams, strict: bool = False) -> np.ndarray:
        """
        Pack parameters into a vector; absent entries become 0 unless ``strict``.

        Raises:
            UnknownItem: In strict mode, when an item or response has no value
        """
        vec = np.zeros(self.n_params)
        vec[LAM] = params.lam
        vec[MU] = params.mu
        for i, item_id in enumerate(self.item_ids):
            if item_id in params.nu:
                vec[NU0 + i] = params.nu[item_id]
            elif strict:
                raise UnknownItem("no length bias in parameters", item_id=item_id)
        base = NU0 + self.n_items
        for k, key in enumerate(self.response_keys):
            if key in params.quality:
                vec[base + k] = params.quality[key]
            elif strict:
                raise UnknownItem(f"no quality for response {key[1]}", item_id=key[0])
        return vec

    def unpack(self, vec: np.ndarray, sigma2: float) -> VotingParams:
        base = NU0 + self.n_items
        return VotingParams(
            lam=float(vec[LAM]),
            mu=float(vec[MU]),
            nu={item_id: float(vec[NU0 + i]) for i, item_id in enumerate(self.item_ids)},
            quality={key: float(vec[base + k]) for k, key in enumerate(self.response_keys)},
            sigma2=sigma2,
        )

    def linear_predictor(self, vec: np.ndarray) -> np.ndarray:
        """η = q + λ r + μ s + ν u for every vote row."""
        q = vec[NU0 + self.n_items:]
        nu = vec[NU0:NU0 + self.n_items]
        return (q[self.vote_resp] + vec[LAM] * self.r + vec[MU] * self.s
                + nu[self.vote_item] * self.u)


class VotingObjective:
    """
    Penalized voting log-likelihood over a design, restricted to free parameters.

    The value maximized is
        Σ log p(v) − Σ q² / (2σ²) − ridge · (λ² + μ² + Σ ν²),
    with knocked-out groups, ν of items with too few votes and q of responses
    not yet written pinned to 0.
    """

    def __init__(self, design: VotingDesign, sigma2: float, mask: FeatureMask,
                 options: FitOptions):
        self.design = design
        self.sigma2 = sigma2
        self.mask = mask
        self.options = options

        rows = np.ones(design.n_votes, dtype=bool)
        if options.exclude_first_vote:
            rows &= ~design.first_vote
        self.rows = rows
        self.y = design.y[rows]
        self.resp = design.vote_resp[rows]
        self.item = design.vote_item[rows]
        self.r = design.r[rows]
        self.s = design.s[rows]
        self.u = design.u[rows]

        n_items, n_resp = design.n_items, design.n_responses
        self.prior = np.zeros(n_resp)
        self.prior[design.write_resp] = 1.0

        free = np.zeros(design.n_params, dtype=bool)
        free[LAM] = mask.active(ParamGroup.LAMBDA)
        free[MU] = mask.active(ParamGroup.MU)
        if mask.active(ParamGroup.NU):
            item_votes = np.bincount(self.item, minlength=n_items)
            free[NU0:NU0 + n_items] = item_votes >= options.min_item_votes
        if mask.active(ParamGroup.QUALITY):
            free[NU0 + n_items:] = self.prior > 0
        self.free = free

        ridge = np.zeros(design.n_params)
        ridge[:NU0 + n_items] = 2.0 * options.ridge
        ridge[NU0 + n_items:] = self.prior / sigma2
        self.curvature = ridge

    @property
    def n_free(self) -> int:
        return int(self.free.sum())

    def _eta(self, vec: np.ndarray) -> np.ndarray:
        n_items = self.design.n_items
        q = vec[NU0 + n_items:]
        nu = vec[NU0:NU0 + n_items]
        return q[self.resp] + vec[LAM] * self.r + vec[MU] * self.s + nu[self.item] * self.u

    def vote_loglik(self, vec: np.ndarray) -> float:
        return float(np.sum(log_expit((2.0 * self.y - 1.0) * self._eta(vec))))

    def value(self, vec: np.ndarray) -> float:
        return self.vote_loglik(vec) - 0.5 * float(np.dot(self.curvature, vec * vec))

    def gradient(self, vec: np.ndarray) -> np.ndarray:
        design = self.design
        n_items = design.n_items
        e = self.y - expit(self._eta(vec))
        grad = np.empty(design.n_params)
        grad[LAM] = np.dot(e, self.r)
        grad[MU] = np.dot(e, self.s)
        grad[NU0:NU0 + n_items] = np.bincount(self.item, weights=e * self.u, minlength=n_items)
        grad[NU0 + n_items:] = np.bincount(self.resp, weights=e, minlength=design.n_responses)
        grad -= self.curvature * vec
        return grad

    def hessian_vector(self, vec: np.ndarray, direction: np.ndarray) -> np.ndarray:
        design = self.design
        n_items = design.n_items
        p = expit(self._eta(vec))
        a = p * (1.0 - p) * self._eta(direction)
        out = np.empty(design.n_params)
        out[LAM] = np.dot(a, self.r)
        out[MU] = np.dot(a, self.s)
        out[NU0:NU0 + n_items] = np.bincount(self.item, weights=a * self.u, minlength=n_items)
        out[NU0 + n_items:] = np.bincount(self.resp, weights=a, minlength=design.n_responses)
        return -out - self.curvature * direction

    def prior_loglik(self, vec: np.ndarray) -> float:
        """Σ log N(q; 0, σ²) over written responses."""
        q = vec[NU0 + self.design.n_items:][self.prior > 0]
        return float(np.sum(norm.logpdf(q, loc=0.0, scale=np.sqrt(self.sigma2))))

    def maximize(self, start: np.ndarray) -> Tuple[np.ndarray, int]:
        """Maximize over the free parameters from ``start``; returns (vector, iterations)."""
        vec = np.where(self.free, start, 0.0)
        if self.n_free == 0:
            return vec, 0

        free = self.free

        def expand(x: np.ndarray) -> np.ndarray:
            full = vec.copy()
            full[free] = x
            return full

        def fun(x: np.ndarray):
            full = expand(x)
            value = self.value(full)
            if not np.isfinite(value):
                raise NonFinite(f"voting objective is not finite ({value})")
            return -value, -self.gradient(full)[free]

        def hessp(x: np.ndarray, p: np.ndarray) -> np.ndarray:
            direction = np.zeros_like(vec)
            direction[free] = p
            return -self.hessian_vector(expand(x), direction)[free]

        result = minimize(
            fun,
            vec[free],
            jac=True,
            hessp=hessp,
            method="trust-ncg",
            options={"gtol": self.options.tol, "maxiter": self.options.max_iters},
        )
        return expand(result.x), int(result.nit)


def fit_design(
    design: VotingDesign,
    sigma2: float = 1.0,
    init: Optional[np.ndarray] = None,
    knockout: FeatureMask = FeatureMask(),
    options: FitOptions = FitOptions(),
) -> Tuple[FitResult, np.ndarray]:
    """
    Fit the voting model on a (possibly restricted) design.

    Returns:
        The FitResult and the packed parameter vector, for warm starts

    Raises:
        NonFinite: If the objective diverges
    """
    objective = VotingObjective(design, sigma2, knockout, options)
    start = np.zeros(design.n_params) if init is None else np.asarray(init, dtype=np.float64)
    if not np.all(np.isfinite(start)):
        raise NonFinite("initial parameters are not finite")

    vec, iterations = objective.maximize(start)
    value = objective.value(vec)
    grad = objective.gradient(vec)[objective.free]
    grad_norm = float(np.linalg.norm(grad)) if grad.size else 0.0
    if not (np.isfinite(value) and np.isfinite(grad_norm)):
        raise NonFinite(f"fit ended at a non-finite objective ({value}, |grad|={grad_norm})")

    vote_ll = objective.vote_loglik(vec)
    final_ll = vote_ll
    if knockout.active(ParamGroup.QUALITY):
        final_ll += objective.prior_loglik(vec)
    converged = grad_norm <= options.tol
    if not converged:
        logger.warning(
            f"Voting fit stopped after {iterations} iterations with |grad|={grad_norm:.3g} "
            f"(tol {options.tol:g})"
        )

    result = FitResult(
        params=design.unpack(vec, sigma2),
        final_loglik=final_ll,
        vote_loglik=vote_ll,
        objective=value,
        grad_norm=grad_norm,
        iterations=iterations,
        converged=converged,
        mask=knockout,
        n_votes=int(objective.rows.sum()),
    )
    return result, vec


def fit_voting(
    ds: Dataset,
    urn: UrnConfig = UrnConfig(),
    init: Optional[VotingParams] = None,
    knockout: FeatureMask = FeatureMask(),
    options: FitOptions = FitOptions(),
    sigma2: Optional[float] = None,
    design: Optional[VotingDesign] = None,
) -> FitResult:
    """
    Maximize the regularized voting log-likelihood of a dataset.

    Args:
        ds: Dataset to fit
        urn: Urn configuration used to build the ratio features
        init: Warm-start parameters (missing entries start at 0)
        knockout: Parameter groups pinned to 0
        options: Ridge weight, tolerance and iteration cap
        sigma2: Quality prior variance (defaults to ``init.sigma2`` or 1.0)
        design: Prebuilt design for ``ds``, to skip the replay

    Returns:
        The fitted parameters with diagnostics

    Raises:
        NonFinite: If the objective diverges
    """
    if sigma2 is None:
        sigma2 = init.sigma2 if init is not None else 1.0
    if design is None:
        design = VotingDesign.build(ds, urn)
    start = design.pack(init) if init is not None else None

    logger.info(
        f"Fitting voting model on {design.n_votes} votes, {design.n_responses} responses "
        f"(knockout: {knockout.label})"
    )
    result, _ = fit_design(design, sigma2=sigma2, init=start, knockout=knockout, options=options)
    logger.info(
        f"Voting fit: loglik={result.final_loglik:.6f} lambda={result.params.lam:.4f} "
        f"mu={result.params.mu:.4f} iterations={result.iterations}"
    )
    return result


def voting_loglik(
    ds: Dataset,
    params: VotingParams,
    urn: UrnConfig = UrnConfig(),
    include_prior: bool = True,
    exclude_first_vote: bool = False,
    design: Optional[VotingDesign] = None,
) -> float:
    """
    Voting-phase log-likelihood ℓ_v.

    Sums log N(q; 0, σ²) over writes (when ``include_prior``) and log p(v)
    over votes, each vote scored on the state before it.

    Raises:
        UnknownItem: If ``params`` lacks a value for some item or response
    """
    if design is None:
        design = VotingDesign.build(ds, urn)
    vec = design.pack(params, strict=True)
    eta = design.linear_predictor(vec)
    terms = log_expit((2.0 * design.y - 1.0) * eta)
    if exclude_first_vote:
        terms = terms[~design.first_vote]
    total = float(np.sum(terms))
    if include_prior:
        q = vec[NU0 + design.n_items:][design.write_resp]
        total += float(np.sum(norm.logpdf(q, loc=0.0, scale=np.sqrt(params.sigma2))))
    return total


# --- Single-response toy regression ----------------------------------------


@dataclass(frozen=True)
class ToyFit:
    """
    Solution of the single-response regression.

    Attributes:
        q: Intrinsic quality
        lam: Weight of the positive ratio (or count)
        mu: Weight of the negative ratio (or count)
        objective: Penalized log-likelihood at the optimum
        n_terms: Votes in the objective (all but the first)
    """
    q: float
    lam: float
    mu: float
    objective: float
    n_terms: int


def _toy_features(
    votes: Sequence[int], urn: UrnConfig, features: str
) -> Tuple[np.ndarray, np.ndarray]:
    tracker = StateTracker(urn)
    tracker.add_response(1)
    rows = []
    for polarity in votes:
        state = tracker.snapshot()
        if features == "ratios":
            rows.append((1.0, state.ratio_pos[0], state.ratio_neg[0]))
        elif features == "counts":
            rows.append((1.0, state.urn_x[0], state.urn_y[0]))
        else:
            raise ValueError(f"unknown toy features {features!r}")
        tracker.add_vote(0, polarity)
    X = np.asarray(rows[1:], dtype=np.float64)
    y = np.asarray(votes[1:], dtype=np.float64)
    return X, y


def fit_toy_response(
    votes: Sequence[int],
    urn: UrnConfig = UrnConfig(),
    ridge: float = 0.5,
    features: str = "ratios",
) -> ToyFit:
    """
    Fit (q, λ, μ) to the vote sequence of a single response.

    The first vote is excluded from the likelihood (its context is the bare
    prior); each later vote is explained by q plus the urn ratios before it,
    with penalty ``ridge * ||(q, λ, μ)||²``.

    Args:
        votes: Vote polarities in arrival order (1 = positive)
        urn: Urn pseudo-votes and reinforcement
        ridge: Penalty weight; 0.5 gives the usual ½||θ||²
        features: ``"ratios"`` (urn ratios) or ``"counts"`` (urn masses x, y)

    Raises:
        TooShort: If fewer than two votes are given
    """
    if len(votes) < 2:
        raise TooShort(f"need at least 2 votes, got {len(votes)}")
    X, y = _toy_features([int(v) for v in votes], urn, features)
    sign = 2.0 * y - 1.0

    def fun(theta: np.ndarray):
        eta = X @ theta
        value = np.sum(log_expit(sign * eta)) - ridge * np.dot(theta, theta)
        grad = X.T @ (y - expit(eta)) - 2.0 * ridge * theta
        return -value, -grad

    def hess(theta: np.ndarray) -> np.ndarray:
        p = expit(X @ theta)
        return (X.T * (p * (1.0 - p))) @ X + 2.0 * ridge * np.eye(3)

    result = minimize(fun, np.zeros(3), jac=True, hess=hess, method="trust-exact",
                      options={"gtol": 1e-12})
    q, lam, mu = (float(v) for v in result.x)
    return ToyFit(q=q, lam=lam, mu=mu, objective=-float(result.fun), n_terms=len(y))


def toy_quality_trajectory(
    votes: Sequence[int],
    urn: UrnConfig = UrnConfig(),
    ridge: float = 0.5,
) -> List[float]:
    """Quality estimate after each prefix of ``votes``, for T = 2..len(votes)."""
    return [fit_toy_response(votes[:T], urn, ridge).q for T in range(2, len(votes) + 1)]


def urn_ratio_gains(
    votes: Sequence[int], urn: UrnConfig = UrnConfig()
) -> List[Tuple[float, float, float]]:
    """
    Urn ratios after each vote and the gain of the voted polarity.

    Returns:
        ``(r, s, gain)`` for t = 0..T; the gain at t = 0 is 0
    """
    tracker = StateTracker(urn)
    tracker.add_response(1)
    state = tracker.snapshot()
    rows = [(float(state.ratio_pos[0]), float(state.ratio_neg[0]), 0.0)]
    for polarity in votes:
        before = state
        tracker.add_vote(0, int(polarity))
        state = tracker.snapshot()
        if polarity:
            gain = state.ratio_pos[0] - before.ratio_pos[0]
        else:
            gain = state.ratio_neg[0] - before.ratio_neg[0]
        rows.append((float(state.ratio_pos[0]), float(state.ratio_neg[0]), float(gain)))
    return rows
