"""Tests for exposure assignment and Monte Carlo policy copies."""

import numpy as np
import pytest

from nettmle.config import PolicySpec, SimConfig
from nettmle.errors import ResourceBudgetError
from nettmle.graph import generate_uniform
from nettmle.policy import observational_assignment, priority_eligible, sample_policy_copies
from nettmle.simulator import run_sir


def test_priority_all_keeps_every_free_node():
    free = np.array([True, False, True, True])
    mask = priority_eligible(PolicySpec(p_omega=0.5), np.array([1, 5, 2, 0]), free)
    assert np.array_equal(mask, free)


def test_most_connected_quarantined_node_keeps_its_slot():
    """budget 0.5 of 4 nodes ranks all nodes; a quarantined top node is not replaced."""
    policy = PolicySpec(p_omega=0.5, budget_fraction=0.5, priority="most_connected")
    degrees = np.array([3, 9, 3, 1])
    free = np.array([True, False, True, True])
    mask = priority_eligible(policy, degrees, free)
    assert mask.tolist() == [True, False, False, False]


def test_most_connected_ties_break_by_node_id():
    policy = PolicySpec(p_omega=0.5, budget_fraction=0.5, priority="most_connected")
    mask = priority_eligible(policy, np.array([3, 9, 3, 1]), np.ones(4, dtype=bool))
    assert mask.tolist() == [True, True, False, False]


def test_least_connected_takes_lowest_degree_free_nodes():
    policy = PolicySpec(p_omega=0.5, budget_fraction=0.25, priority="least_connected")
    mask = priority_eligible(policy, np.array([4, 2, 2, 7]), np.ones(4, dtype=bool))
    assert mask.tolist() == [False, True, False, False]


def test_all_priority_requires_full_budget():
    with pytest.raises(ValueError):
        PolicySpec(p_omega=0.5, budget_fraction=0.5, priority="all")


def test_observational_assignment_follows_logistic_rule():
    """Empirical compliance matches expit of the linear predictor."""
    rng = np.random.default_rng(0)
    n = 20000
    xi = np.zeros((n, 3))
    xi_s = np.zeros((n, 2))
    coeffs = np.array([0.0, 1.0, 1.0, 1.0, 1.0, 1.0])
    alpha = observational_assignment(xi, xi_s, coeffs, rng)
    assert abs(alpha.mean() - 0.5) < 0.02


def test_observational_assignment_respects_eligibility():
    rng = np.random.default_rng(1)
    coeffs = np.array([10.0, 0.0, 0.0])
    eligible = np.array([True, False, True])
    alpha = observational_assignment(np.zeros(3), np.zeros(3), coeffs, rng, eligible)
    assert alpha.tolist() == [1, 0, 1]


def test_observational_assignment_checks_coefficients():
    with pytest.raises(ValueError):
        observational_assignment(np.zeros((4, 3)), np.zeros((4, 2)), np.zeros(3), np.random.default_rng(0))


def test_observational_assignment_saturates_to_zero():
    """An intercept of -20 gives an all-zero assignment."""
    rng = np.random.default_rng(2)
    xi = rng.random((1000, 3)) * np.array([1.0, 6.0, 3.0])
    xi_s = rng.random((1000, 2))
    coeffs = np.array([-20.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    assert observational_assignment(xi, xi_s, coeffs, rng).sum() == 0


def test_infected_neighbours_raise_compliance():
    """A +2 coefficient on infected contacts makes exposed nodes comply more often."""
    rng = np.random.default_rng(3)
    xi = np.zeros((1000, 3))
    xi[500:, 1] = 2.0
    coeffs = np.array([0.0, 0.0, 2.0, 0.0, 0.0, 0.0])
    alpha = observational_assignment(xi, np.zeros((1000, 2)), coeffs, rng)
    assert alpha[500:].mean() > alpha[:500].mean()


# ── Policy copies ───────────────────────────────────────────


def test_copies_carry_observed_static_covariates(observed):
    panel, realized, config = observed
    copies = sample_policy_copies(panel, realized, PolicySpec(p_omega=0.3), 4, seed=5, config=config)
    assert len(copies) == 4
    for copy in copies:
        assert not copy.has_outcomes
        assert np.array_equal(copy.xi_static, panel.xi_static)
        assert np.array_equal(copy.xi_inf_nbrs, panel.xi_inf_nbrs)
        assert np.array_equal(copy.xi_s_infsum, panel.xi_s_infsum)


def test_copies_follow_policy_exposure_rate(observed):
    """With nobody quarantined yet at t=1, the exposure rate at t=1 is p_omega."""
    panel, realized, config = observed
    copies = sample_policy_copies(panel, realized, PolicySpec(p_omega=0.7), 30, seed=2, config=config)
    rate = np.mean([c.alpha[1].mean() for c in copies])
    assert abs(rate - 0.7) < 0.03


def test_copies_recompute_alpha_s_on_their_own_network(observed):
    """alpha_s* counts quarantined contacts on the copy's quarantine-realized snapshot."""
    panel, realized, config = observed
    (copy,) = sample_policy_copies(panel, realized, PolicySpec(p_omega=0.5), 1, seed=9, config=config)
    base = realized.base.astype(int)
    assert np.array_equal(copy.alpha_s[1], base @ copy.alpha[1])


def test_copies_are_seed_deterministic(observed):
    panel, realized, config = observed
    a = sample_policy_copies(panel, realized, PolicySpec(p_omega=0.4), 3, seed=4, config=config)
    b = sample_policy_copies(panel, realized, PolicySpec(p_omega=0.4), 3, seed=4, config=config)
    assert all(np.array_equal(x.alpha, y.alpha) for x, y in zip(a, b))


def test_copies_respect_record_budget(observed):
    """M·N above the budget raises with a smaller suggested M."""
    panel, realized, config = observed
    with pytest.raises(ResourceBudgetError) as info:
        sample_policy_copies(panel, realized, PolicySpec(p_omega=0.5), 10, seed=0, config=config, max_records=500)
    assert info.value.suggested_m == 500 // panel.n


def test_copies_need_at_least_one(observed):
    panel, realized, _ = observed
    with pytest.raises(ValueError):
        sample_policy_copies(panel, realized, PolicySpec(p_omega=0.5), 0, seed=0, config=SimConfig())


def test_zero_exposure_policy_samples_nothing(observed):
    panel, realized, config = observed
    copies = sample_policy_copies(panel, realized, PolicySpec(p_omega=0.0), 5, seed=6, config=config)
    for copy in copies:
        assert not copy.alpha.any()
        assert not copy.alpha_s.any()


def test_most_connected_half_budget_exposes_top_half(observed):
    """p_omega=1 with a 0.5 budget exposes exactly the top ⌈N/2⌉ nodes by degree."""
    panel, realized, config = observed
    policy = PolicySpec(p_omega=1.0, budget_fraction=0.5, priority="most_connected")
    degrees = realized.base.sum(axis=1)
    nodes = np.arange(panel.n)
    top = np.zeros(panel.n, dtype=bool)
    top[np.lexsort((nodes, -degrees))[: int(np.ceil(panel.n / 2))]] = True

    copies = sample_policy_copies(panel, realized, policy, 3, seed=8, config=config)
    for copy in copies:
        assert np.array_equal(copy.alpha[1].astype(bool), top)
        ever = copy.alpha[1:].any(axis=0)
        assert np.array_equal(ever, top)
        assert (copy.alpha[1:].sum(axis=1) <= top.sum()).all()


def test_per_node_exposure_frequency():
    """p_omega=0.5 over 500 copies: each node is exposed on about half its eligible steps."""
    config = SimConfig(init_infected_fraction=0.05, transmission_prob=0.3)
    network = generate_uniform(100, 1, 6, seed=21)
    panel, realized = run_sir(network, PolicySpec.observational(), config, seed=22)
    copies = sample_policy_copies(panel, realized, PolicySpec(p_omega=0.5), 500, seed=23, config=config)

    period = config.quarantine_period
    exposed = np.zeros(panel.n)
    eligible = np.zeros(panel.n)
    for copy in copies:
        alpha = copy.alpha
        for t in range(1, panel.time_horizon + 1):
            free = ~alpha[max(1, t - period + 1) : t].any(axis=0)
            eligible += free
            exposed += alpha[t] * free
    freq = exposed / eligible
    assert np.all(np.abs(freq - 0.5) < 0.05)
