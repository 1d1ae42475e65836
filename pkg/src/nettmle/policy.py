"""Quarantine policies: eligibility, observational compliance, and policy-sampled copies."""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit

from nettmle.config import PolicySpec, SimConfig
from nettmle.errors import ResourceBudgetError
from nettmle.graph import TemporalNetwork, summary_covariate, summary_exposure
from nettmle.panel import Panel
from nettmle.quarantine import QuarantineEngine
from nettmle.seeding import Seed, as_seed_sequence

logger = logging.getLogger(__name__)


def priority_eligible(policy: PolicySpec, degrees: np.ndarray, free: np.ndarray) -> np.ndarray:
    """Nodes a counterfactual policy may expose at this step.

    Ranks all N nodes by contact degree (ties broken by node id) and keeps the
    first ⌈budget·N⌉ that are free; a ranked node already in quarantine holds its
    slot. Priority ``all`` keeps every free node.
    """
    if policy.priority == "all":
        return free.copy()
    nodes = np.arange(len(free))
    if policy.priority == "most_connected":
        order = np.lexsort((nodes, -degrees))
    else:
        order = np.lexsort((nodes, degrees))
    mask = np.zeros_like(free)
    mask[order[: policy.budget_count(len(free))]] = True
    return mask & free


def observational_assignment(
    xi: np.ndarray,
    xi_s: np.ndarray,
    coeffs: np.ndarray,
    rng: np.random.Generator,
    eligible: np.ndarray | None = None,
) -> np.ndarray:
    """Comply with probability expit(coeffs·[1, ξ, ξ^s]) among eligible individuals."""
    xi = np.asarray(xi, dtype=np.float64)
    xi = xi.reshape(len(xi), -1)
    xi_s = np.asarray(xi_s, dtype=np.float64)
    xi_s = xi_s.reshape(len(xi_s), -1)
    n = xi.shape[0]
    design = np.column_stack([np.ones(n), xi, xi_s])
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (design.shape[1],):
        raise ValueError(
            f"coefficient vector has length {coeffs.size}, design has {design.shape[1]} columns"
        )
    comply = rng.random(n) < expit(design @ coeffs)
    if eligible is not None:
        comply &= eligible
    return comply.astype(np.int64)


def decide_exposures(
    policy: PolicySpec,
    engine: QuarantineEngine,
    degrees: np.ndarray,
    t: int,
    rng: np.random.Generator,
    xi: np.ndarray | None = None,
    xi_s: np.ndarray | None = None,
    coeffs: np.ndarray | None = None,
) -> np.ndarray:
    """New quarantine activations α(t) under either policy mode.

    ``degrees`` are pre-quarantine contact degrees, used for budget priority.
    """
    free = engine.eligible(t)
    if policy.mode == "observational":
        if xi is None or xi_s is None or coeffs is None:
            raise ValueError("observational assignment needs covariates and coefficients")
        return observational_assignment(xi, xi_s, coeffs, rng, eligible=free)
    eligible = priority_eligible(policy, degrees, free)
    return ((rng.random(engine.n) < policy.p_omega) & eligible).astype(np.int64)


def _sample_copy(
    observed: Panel,
    base: np.ndarray,
    policy: PolicySpec,
    config: SimConfig,
    rng: np.random.Generator,
) -> Panel:
    horizon, n = observed.time_horizon, observed.n
    engine = QuarantineEngine(n, config.quarantine_period, config.allow_requarantine)
    alpha = np.zeros((horizon + 1, n), dtype=np.int64)
    alpha_s = np.zeros_like(alpha)
    quar_hist = np.zeros((horizon + 1, n))
    s_mean = np.zeros((horizon + 1, n))
    s_mean[0] = summary_covariate(base, observed.xi_static, "mean")
    coeffs = config.assignment.as_vector()

    snapshot = base
    degrees = base.sum(axis=1)
    for t in range(1, horizon + 1):
        quar_hist[t] = quar_hist[t - 1] + engine.active(t - 1)
        s_mean[t] = summary_covariate(snapshot, observed.xi_static, "mean")
        xi = np.column_stack([observed.xi_static, observed.xi_inf_nbrs[t], quar_hist[t]])
        xi_s = np.column_stack([s_mean[t], observed.xi_s_infsum[t]])
        a = decide_exposures(policy, engine, degrees, t, rng, xi, xi_s, coeffs)
        alpha[t] = a
        alpha_s[t] = summary_exposure(snapshot, a)
        engine.activate(a, t)
        if not config.leaky:
            snapshot = QuarantineEngine.isolate(base, engine.active(t))

    return Panel(
        alpha=alpha,
        alpha_s=alpha_s,
        xi_static=observed.xi_static.copy(),
        xi_inf_nbrs=observed.xi_inf_nbrs.copy(),
        xi_quar_hist=quar_hist,
        xi_s_mean=s_mean,
        xi_s_infsum=observed.xi_s_infsum.copy(),
    )


def sample_policy_copies(
    observed: Panel,
    network: TemporalNetwork,
    policy: PolicySpec,
    m_copies: int,
    seed: Seed,
    config: SimConfig | None = None,
    max_records: int = 5_000_000,
) -> list[Panel]:
    """Draw M copies of the exposure process under ``policy`` on the base network.

    Each copy starts from the base snapshot, draws α*(t), recomputes α^s*(t) on
    the copy's own quarantine-realized snapshot, and steps forward to T. Copies
    carry no outcomes; infection-driven covariates come from the observed panel.
    """
    if m_copies < 1:
        raise ValueError(f"m_copies must be >= 1, got {m_copies}")
    if network.n != observed.n:
        raise ValueError(f"network has {network.n} nodes, panel has {observed.n}")
    records = m_copies * observed.n
    if records > max_records:
        suggested = max(1, max_records // observed.n)
        raise ResourceBudgetError(requested=records, budget=max_records, suggested_m=suggested)

    config = config or SimConfig()
    seeds = as_seed_sequence(seed)
    copies = [
        _sample_copy(observed, network.base, policy, config, np.random.default_rng(child))
        for child in seeds.spawn(m_copies)
    ]
    logger.debug("sampled %d copies under %s", m_copies, policy.label)
    return copies
