"""SIR epidemic with quarantine on a contact network, and counterfactual ground truth."""

from __future__ import annotations

import logging

import numpy as np

from nettmle.config import PolicySpec, SimConfig
from nettmle.graph import TemporalNetwork, summary_covariate, summary_exposure
from nettmle.panel import INFECTED, RECOVERED, SUSCEPTIBLE, Panel
from nettmle.policy import decide_exposures
from nettmle.quarantine import QuarantineEngine
from nettmle.seeding import Seed, as_seed_sequence

logger = logging.getLogger(__name__)


def _infection_probability(
    base: np.ndarray,
    snapshot: np.ndarray,
    infectious: np.ndarray,
    config: SimConfig,
) -> np.ndarray:
    """Per-node probability of catching the disease from at least one active contact.

    Under edge removal only the realized snapshot transmits. In leaky mode the
    base edges are kept and edges touching a quarantined node transmit with
    probability scaled by ``leaky_multiplier``.
    """
    beta = config.transmission_prob
    infectious = infectious.astype(np.float64)
    free_contacts = snapshot.astype(np.float64) @ infectious
    escape = (1.0 - beta) ** free_contacts
    if config.leaky:
        leaky_contacts = base.astype(np.float64) @ infectious - free_contacts
        escape *= (1.0 - beta * config.leaky_multiplier) ** leaky_contacts
    return 1.0 - escape


def run_sir(
    network: TemporalNetwork,
    policy: PolicySpec,
    config: SimConfig | None = None,
    seed: Seed | None = None,
) -> tuple[Panel, TemporalNetwork]:
    """Simulate one epidemic under a quarantine policy.

    Each step t = 1..T measures covariates on state(t−1) and γ(t−1), draws new
    quarantines α(t), isolates quarantined nodes for P steps, transmits along
    the realized snapshot γ(t), and recovers nodes that have been infectious
    for ``infectious_duration`` steps.

    Args:
        network: Contact network; only the base snapshot is used.
        policy: Observational rule or counterfactual Bernoulli(p_omega) policy.
        config: Epidemic parameters; defaults when omitted.
        seed: Seed for the replicate. Falls back to ``config.rng_seed``.

    Returns:
        The panel (with outcomes) and the realized snapshots γ(0..T).
    """
    config = config or SimConfig()
    root = as_seed_sequence(config.rng_seed if seed is None else seed)
    init_rng, policy_rng, infect_rng = (np.random.default_rng(s) for s in root.spawn(3))

    n, horizon = network.n, config.t_steps
    base = network.base
    engine = QuarantineEngine(n, config.quarantine_period, config.allow_requarantine)
    coeffs = config.assignment.as_vector()

    state = np.full((horizon + 1, n), SUSCEPTIBLE, dtype=np.int64)
    infected_at = np.full(n, -1, dtype=np.int64)
    seeds = init_rng.choice(n, size=config.initial_infected_count(n), replace=False)
    state[0, seeds] = INFECTED
    infected_at[seeds] = 0
    xi_static = init_rng.random(n)

    alpha = np.zeros((horizon + 1, n), dtype=np.int64)
    alpha_s = np.zeros_like(alpha)
    inf_nbrs = np.zeros((horizon + 1, n))
    quar_hist = np.zeros((horizon + 1, n))
    s_mean = np.zeros((horizon + 1, n))
    s_infsum = np.zeros((horizon + 1, n))
    in_quarantine = np.zeros((horizon + 1, n), dtype=bool)

    def measure(t: int, snapshot: np.ndarray, prev_state: np.ndarray) -> None:
        infectious = (prev_state == INFECTED).astype(np.int64)
        inf_nbrs[t] = summary_exposure(base, infectious)
        s_mean[t] = summary_covariate(snapshot, xi_static, "mean")
        s_infsum[t] = summary_covariate(snapshot, infectious, "sum")

    measure(0, base, state[0])
    snapshots = [base]
    degrees = base.sum(axis=1)
    for t in range(1, horizon + 1):
        prev = state[t - 1]
        snapshot = snapshots[-1]
        quar_hist[t] = quar_hist[t - 1] + engine.active(t - 1)
        measure(t, snapshot, prev)

        # ── Quarantine decisions on the pre-removal snapshot ──
        xi = np.column_stack([xi_static, inf_nbrs[t], quar_hist[t]])
        xi_s = np.column_stack([s_mean[t], s_infsum[t]])
        a = decide_exposures(policy, engine, degrees, t, policy_rng, xi, xi_s, coeffs)
        alpha[t] = a
        alpha_s[t] = summary_exposure(snapshot, a)
        engine.activate(a, t)
        in_quarantine[t] = engine.active(t)
        realized = base if config.leaky else QuarantineEngine.isolate(base, in_quarantine[t])
        snapshots.append(realized)

        # ── Transmission and recovery ──
        p_inf = _infection_probability(base, realized, prev == INFECTED, config)
        caught = (infect_rng.random(n) < p_inf) & (prev == SUSCEPTIBLE)
        current = prev.copy()
        current[caught] = INFECTED
        infected_at[caught] = t
        recovering = (prev == INFECTED) & (t - infected_at >= config.infectious_duration)
        current[recovering] = RECOVERED
        state[t] = current

    upsilon = (state == INFECTED).any(axis=0).astype(np.int64)
    panel = Panel(
        alpha=alpha,
        alpha_s=alpha_s,
        xi_static=xi_static,
        xi_inf_nbrs=inf_nbrs,
        xi_quar_hist=quar_hist,
        xi_s_mean=s_mean,
        xi_s_infsum=s_infsum,
        state=state,
        upsilon=upsilon,
        in_quarantine=in_quarantine,
    )
    return panel, network.with_snapshots(snapshots)


def counterfactual_truth(
    network: TemporalNetwork,
    policy: PolicySpec,
    config: SimConfig | None = None,
    n_reps: int = 30,
    seed: Seed = 0,
) -> float:
    """Mean ever-infected fraction over ``n_reps`` simulations under ``policy``.

    Evaluation only: estimators never see this value.
    """
    if n_reps < 1:
        raise ValueError(f"n_reps must be >= 1, got {n_reps}")
    root = as_seed_sequence(seed)
    attack_rates = [
        run_sir(network, policy, config, seed=child)[0].upsilon.mean() for child in root.spawn(n_reps)
    ]
    psi = float(np.mean(attack_rates))
    logger.debug("truth for %s over %d reps: %.4f", policy.label, n_reps, psi)
    return psi
