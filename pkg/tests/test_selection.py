"""Tests for the selection phase and the CRP baseline."""

import numpy as np
import pytest

from chinese_voting.core.errors import (
    ConfigError,
    MissingDisplayOrder,
    Unidentifiable,
    ValidationError,
)
from chinese_voting.core.trajectory import StateTracker, UrnConfig, ingest_event_log
from chinese_voting.models.base import RankBase, SelectionParams
from chinese_voting.models.selection import (
    SelectionDesign,
    crp_selection_distribution,
    crp_selection_loglik,
    fit_tau,
    popularity,
    selection_distribution,
    selection_grad_tau,
    selection_loglik,
)
from chinese_voting.simulation.simulator import SimConfig, simulate_community
from tests.helpers import make_log, single_response_log, vote, write


def _state(n_responses, order=None, votes=()):
    tracker = StateTracker(UrnConfig())
    for _ in range(n_responses):
        tracker.add_response(100)
    for response, polarity in votes:
        tracker.add_vote(response, polarity)
    if order is None:
        order = list(range(n_responses))
    return tracker.snapshot(order)


def _swap_logs():
    """Two logs with the same votes in opposite order and updated display orders."""
    head = [write("p1", 1), write("p1", 2, order=[0])]
    original = head + [vote("p1", 3, 0, 1, [0, 1]), vote("p1", 4, 1, 1, [0, 1])]
    swapped = head + [vote("p1", 3, 1, 1, [0, 1]), vote("p1", 4, 0, 1, [1, 0])]
    return ingest_event_log(make_log(original)), ingest_event_log(make_log(swapped))


def test_popularity():
    """Test the rank-decay popularity."""
    assert popularity(1, 3.7) == 1.0
    assert popularity(2, 1.0) == pytest.approx(0.5)
    assert popularity(3, 1.0) == pytest.approx(1 / 3)
    assert popularity(5, 0.0) == 1.0
    np.testing.assert_allclose(popularity(np.array([1, 2, 4]), 1.0), [1.0, 0.5, 0.25])


def test_popularity_one_based_rank():
    """Test the alternative rank convention."""
    assert popularity(1, 1.0, RankBase.ONE) == pytest.approx(0.5)


def test_popularity_rejects_rank_zero():
    """Test that display ranks start at 1."""
    with pytest.raises(ValidationError):
        popularity(0, 1.0)


def test_selection_distribution_examples():
    """Test selection probabilities on small states."""
    two = selection_distribution(_state(2), SelectionParams(tau=1.0, alpha=0.5))
    np.testing.assert_allclose(two, [0.5, 0.25, 0.25])

    three = selection_distribution(_state(3), SelectionParams(tau=0.0, alpha=0.5))
    np.testing.assert_allclose(three, [2 / 7, 2 / 7, 2 / 7, 1 / 7])

    empty = selection_distribution(_state(0), SelectionParams(tau=2.0))
    np.testing.assert_array_equal(empty, [1.0])


def test_selection_distribution_uses_display_order():
    """Test that probabilities follow display rank, not write order."""
    probs = selection_distribution(_state(2, order=[1, 0]), SelectionParams(tau=1.0, alpha=0.5))

    np.testing.assert_allclose(probs, [0.25, 0.5, 0.25])


def test_selection_distribution_needs_order():
    """Test that a state without display order cannot be scored."""
    tracker = StateTracker(UrnConfig())
    tracker.add_response(100)

    with pytest.raises(MissingDisplayOrder):
        selection_distribution(tracker.snapshot(), SelectionParams())


def test_selection_distribution_normalized_and_monotone():
    """Test normalization and rank monotonicity on random states."""
    rng = np.random.default_rng(3)
    for _ in range(200):
        J = int(rng.integers(1, 12))
        order = list(rng.permutation(J))
        tau = float(rng.uniform(-3.0, 3.0))
        alpha = float(rng.uniform(0.05, 3.0))
        state = _state(J, order=order)

        probs = selection_distribution(state, SelectionParams(tau=tau, alpha=alpha))

        assert abs(probs.sum() - 1.0) <= 1e-12
        by_rank = probs[:-1][np.asarray(order)]
        if tau > 0:
            assert np.all(np.diff(by_rank) < 0)
        elif tau < 0:
            assert np.all(np.diff(by_rank) > 0)


def test_selection_loglik_forced_first_write():
    """Test that an item's first write carries no selection term."""
    ds = ingest_event_log(make_log([write("p1", 1)]))

    assert selection_loglik(ds, SelectionParams(tau=1.0)) == 0.0


def test_selection_event_logprob_vote_on_top():
    """Test the log-probability of a vote on the top of two responses."""
    ds = ingest_event_log(make_log([
        write("p1", 1), write("p1", 2, order=[0]), vote("p1", 3, 0, 1, [0, 1]),
    ]))
    design = SelectionDesign.build(ds)

    logprob = design.event_logprob(1.0, 0.5)

    assert design.n_events == 2
    assert logprob[-1] == pytest.approx(np.log(0.5))
    assert logprob[0] == pytest.approx(np.log(0.5 / 1.5))


def test_selection_loglik_needs_orders():
    """Test that events after the first must carry a display order."""
    ds = ingest_event_log(make_log([write("p1", 1), write("p1", 2)]))

    with pytest.raises(MissingDisplayOrder):
        selection_loglik(ds, SelectionParams())


def test_selection_grad_tau_example():
    """Test the tau gradient of selecting the second of two responses."""
    ds = ingest_event_log(make_log([
        write("p1", 1), write("p1", 2, order=[0]), vote("p1", 3, 1, 1, [0, 1]),
    ]))

    grad = selection_grad_tau(ds, SelectionParams(tau=1.0, alpha=0.5))

    assert grad == pytest.approx(-0.5199, abs=1e-4)


def test_single_response_item_is_uninformative():
    """Test that votes on a lone response say nothing about tau."""
    ds = ingest_event_log(make_log(single_response_log("p1", [1, 0, 1])))

    assert selection_grad_tau(ds, SelectionParams(tau=0.7)) == 0.0
    with pytest.raises(Unidentifiable):
        fit_tau(ds)


@pytest.mark.parametrize("seed", range(100))
def test_selection_grad_matches_finite_differences(seed):
    """Test the analytic tau gradient against central differences on random data."""
    rng = np.random.default_rng(seed)
    cfg = SimConfig(selection=SelectionParams(tau=float(rng.uniform(-1.0, 2.0))),
                    m=int(rng.integers(2, 5)), t_max=int(rng.integers(6, 15)), seed=seed)
    ds, _ = simulate_community(cfg)
    rank_base = RankBase.ZERO if seed % 2 else RankBase.ONE
    design = SelectionDesign.build(ds, rank_base)
    h = 1e-5

    for tau in rng.uniform(-2.0, 3.0, size=3):
        numeric = (design.loglik(tau + h, 0.5) - design.loglik(tau - h, 0.5)) / (2 * h)
        analytic = design.grad(tau, 0.5)
        assert abs(analytic - numeric) <= 1e-5 * max(1.0, abs(analytic))


def test_selection_curvature_matches_gradient(small_community):
    """Test the second derivative against differences of the gradient."""
    ds, _ = small_community
    design = SelectionDesign.build(ds)
    h = 1e-5

    numeric = (design.grad(0.8 + h, 0.5) - design.grad(0.8 - h, 0.5)) / (2 * h)

    assert design.curvature(0.8, 0.5) == pytest.approx(numeric, rel=1e-5)
    assert design.curvature(0.8, 0.5) < 0


@pytest.mark.parametrize("seed", range(20))
def test_selection_loglik_concave_in_tau(seed):
    """Test second differences of the selection log-likelihood on a tau grid."""
    grid = np.linspace(-2.0, 2.0, 41)
    cfg = SimConfig(selection=SelectionParams(tau=float(seed % 5) - 1.0), m=5, t_max=20,
                    seed=seed)
    ds, _ = simulate_community(cfg)

    values = np.array([selection_loglik(ds, SelectionParams(tau=t)) for t in grid])

    assert np.all(np.diff(values, 2) <= 1e-9)


def test_selection_params_reject_non_numbers():
    """Test that a non-numeric alpha is a configuration error."""
    with pytest.raises(ConfigError, match="alpha"):
        SelectionParams(alpha="half")
    with pytest.raises(ConfigError, match="tau"):
        SelectionParams(tau=None)


def test_fit_tau_saturates_when_top_always_chosen():
    """Test that always picking the top response pushes tau to the bracket end."""
    records = [write("p1", 1), write("p1", 2, order=[0])]
    for t in range(3, 12):
        records.append(vote("p1", t, 0, 1, [0, 1]))
    ds = ingest_event_log(make_log(records))

    fit = fit_tau(ds)

    assert fit.tau == 10.0
    assert fit.saturated
    assert fit.n_informative == 9


def test_fit_tau_stationary_point(small_community):
    """Test that the fitted tau is a root of the gradient."""
    ds, _ = small_community

    fit = fit_tau(ds, alpha=0.5)

    assert not fit.saturated
    assert abs(fit.grad) <= 1e-6 * (1.0 + abs(fit.loglik))
    assert fit.loglik == pytest.approx(selection_loglik(ds, SelectionParams(tau=fit.tau)))


def test_fit_tau_recovers_trendiness(trendy_community):
    """Test tau recovery on rank-following data."""
    ds, _ = trendy_community

    assert 1.4 <= fit_tau(ds).tau <= 1.6


def test_fit_tau_recovers_zero(flat_community):
    """Test tau recovery when display rank does not matter."""
    ds, _ = flat_community

    assert abs(fit_tau(ds).tau) <= 0.1


def test_crp_distribution():
    """Test CRP weights with and without the writer pseudo-count."""
    state = _state(2, votes=[(0, 1), (0, 0), (0, 1), (1, 1)])

    np.testing.assert_allclose(crp_selection_distribution(state, 0.5),
                               [4 / 6.5, 2 / 6.5, 0.5 / 6.5])
    np.testing.assert_allclose(crp_selection_distribution(state, 0.5, literal=True),
                               [3 / 4.5, 1 / 4.5, 0.5 / 4.5])
    np.testing.assert_array_equal(crp_selection_distribution(_state(0), 0.5), [1.0])
    assert crp_selection_distribution(state, 1e-12)[-1] < 1e-12


def test_crp_exchangeable_cvp_not():
    """Test that swapping two votes changes the CVP likelihood but not the CRP one."""
    original, swapped = _swap_logs()
    params = SelectionParams(tau=1.0, alpha=0.5)

    assert crp_selection_loglik(original, 0.5) == pytest.approx(crp_selection_loglik(swapped, 0.5))
    assert selection_loglik(original, params) != pytest.approx(selection_loglik(swapped, params))


def test_crp_literal_first_vote_impossible():
    """Test that the literal CRP gives an unvoted response zero mass."""
    original, _ = _swap_logs()

    assert crp_selection_loglik(original, 0.5, literal=True) == -np.inf
    assert np.isfinite(crp_selection_loglik(original, 0.5))


def test_crp_ranks_unordered_events_in_write_order():
    """Test that the CRP baseline tolerates logs without display orders."""
    ds = ingest_event_log(make_log([write("p1", 1), write("p1", 2)]))

    assert crp_selection_loglik(ds, 0.5) == pytest.approx(np.log(0.5 / 1.5))
