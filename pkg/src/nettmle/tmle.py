"""Network TMLE of a quarantine policy's mean outcome.

Pipeline, run by ``run_estimator``:
    1. fit the outcome model on the observed panel (policy copies drawn here)
    2. density-ratio weights W from exposure models fit on observed and sampled data
    3. targeting intercept ε from the weighted logistic score equation
    4. Monte Carlo ψ̂ over the sampled copies
    5. direct and latent variance, and normal confidence intervals
"""

from __future__ import annotations

import logging
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Iterator

import numpy as np
from scipy import optimize, stats
from scipy.special import expit, logit

from nettmle.config import EstimatorConfig, PolicySpec, SimConfig
from nettmle.design import DesignSpec, build_design, fit_bin_edges
from nettmle.errors import EstimatorStepError
from nettmle.graph import SecondOrderClosure, TemporalNetwork, second_order_closure
from nettmle.models import OutcomeModel, build_outcome_model, glm
from nettmle.panel import Panel
from nettmle.policy import sample_policy_copies
from nettmle.seeding import Seed, as_seed_sequence

logger = logging.getLogger(__name__)


# ── Outcome model ─────────────────────────────────────────────


def fit_outcome(
    observed: Panel,
    kind: str,
    spec: DesignSpec,
    config: EstimatorConfig,
    sampled: list[Panel] | None = None,
    reception_field: int | None = None,
    seed: int | None = None,
) -> OutcomeModel:
    """Fit an outcome model; GLM kinds use final-step rows, deep kinds the last T_r steps."""
    model = build_outcome_model(kind, spec, config, reception_field=reception_field, seed=seed)
    return model.fit(observed, sampled)


# ── Weights ───────────────────────────────────────────────────


@dataclass
class WeightSet:
    """Truncated density-ratio weights plus diagnostics of the raw ratios."""

    w: np.ndarray
    truncation_bounds: tuple[float, float]
    raw: np.ndarray
    positivity_warning: bool = False

    @property
    def n_truncated(self) -> int:
        lo, hi = self.truncation_bounds
        return int(((self.raw < lo) | (self.raw > hi)).sum())

    def diagnostics(self) -> str:
        text = (
            f"w_raw[min={self.raw.min():.4g},max={self.raw.max():.4g},mean={self.raw.mean():.4g}]"
            f" truncated={self.n_truncated}"
        )
        if self.positivity_warning:
            text += " positivity_warning"
        return text


def truncate_weights(raw: np.ndarray, bounds: tuple[float, float]) -> np.ndarray:
    lo, hi = bounds
    return np.clip(raw, lo, hi)


def _pooled_design(panels: list[Panel], spec: DesignSpec, role: str, bin_edges: dict) -> np.ndarray:
    return np.concatenate(
        [build_design(p, spec, p.time_horizon, role, bin_edges).matrix for p in panels]
    )


def estimate_iptw(
    observed: Panel,
    sampled: list[Panel],
    spec: DesignSpec,
    bounds: tuple[float, float] = (0.01, 100.0),
    l2_penalty: float = 1.0,
    positivity_floor: float = 1e-12,
) -> WeightSet:
    """W_i = g*(a_i)·h*(a^s_i) / (g(a_i)·h(a^s_i)) at final-step covariates.

    g, g* are binomial models of α(T); h, h* are Poisson models of α^s(T).
    The denominators are fit on the observed panel, the numerators on all
    sampled copies pooled together.
    """
    if not sampled:
        raise ValueError("weight estimation needs at least one policy-sampled copy")
    horizon = observed.time_horizon
    l2 = l2_penalty if spec.l2_penalty else 0.0
    edges = fit_bin_edges(observed, spec, horizon)

    x_g = build_design(observed, spec, horizon, "exposure", edges)
    x_h = build_design(observed, spec, horizon, "summary", edges)
    a = observed.alpha[horizon]
    a_s = observed.alpha_s[horizon]

    g = glm.fit("binomial", x_g.matrix, a, l2=l2, columns=x_g.columns)
    h = glm.fit("poisson", x_h.matrix, a_s, l2=l2, columns=x_h.columns)
    g_star = glm.fit(
        "binomial",
        _pooled_design(sampled, spec, "exposure", edges),
        np.concatenate([p.alpha[p.time_horizon] for p in sampled]),
        l2=l2,
        columns=x_g.columns,
    )
    h_star = glm.fit(
        "poisson",
        _pooled_design(sampled, spec, "summary", edges),
        np.concatenate([p.alpha_s[p.time_horizon] for p in sampled]),
        l2=l2,
        columns=x_h.columns,
    )

    numerator = glm.density(g_star, x_g.matrix, a) * glm.density(h_star, x_h.matrix, a_s)
    denominator = glm.density(g, x_g.matrix, a) * glm.density(h, x_h.matrix, a_s)
    positivity = bool((denominator < positivity_floor).any())
    if positivity:
        logger.warning(
            "positivity: %d denominator densities below %g",
            int((denominator < positivity_floor).sum()),
            positivity_floor,
        )
    raw = numerator / np.maximum(denominator, positivity_floor)
    return WeightSet(
        w=truncate_weights(raw, bounds),
        truncation_bounds=bounds,
        raw=raw,
        positivity_warning=positivity,
    )


# ── Targeting ─────────────────────────────────────────────────


@dataclass
class TargetingResult:
    epsilon: float
    reset: bool
    score: float


def targeting_score(epsilon: float, y: np.ndarray, logit_hat: np.ndarray, w: np.ndarray) -> float:
    """Σ_i W_i (y_i − expit(ε + logit ŷ_i)); strictly decreasing in ε."""
    return float((w * (y - expit(epsilon + logit_hat))).sum())


def solve_targeting(
    y: np.ndarray,
    y_hat: np.ndarray,
    weights: WeightSet | np.ndarray,
    threshold: float = 10.0,
) -> TargetingResult:
    """Root of the weighted intercept-only logistic score, reset to 0 beyond ``threshold``.

    Brent's method on [−threshold, threshold] followed by Newton polishing. A
    root outside the bracket, or no finite root (all-zero or all-one y), gives
    ε = 0 with ``reset=True``.
    """
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    w = weights.w if isinstance(weights, WeightSet) else np.asarray(weights, dtype=np.float64)
    if not (y.shape == y_hat.shape == w.shape):
        raise ValueError(f"shape mismatch: y {y.shape}, y_hat {y_hat.shape}, weights {w.shape}")
    if ((y_hat <= 0) | (y_hat >= 1)).any():
        raise ValueError("predictions must lie strictly inside (0, 1)")
    logit_hat = logit(y_hat)

    lo, hi = targeting_score(-threshold, y, logit_hat, w), targeting_score(threshold, y, logit_hat, w)
    if lo < 0 or hi > 0:
        logger.warning("targeting: |epsilon| exceeds %g, resetting to 0", threshold)
        return TargetingResult(0.0, True, targeting_score(0.0, y, logit_hat, w))

    if lo == 0:
        eps = -threshold
    elif hi == 0:
        eps = threshold
    else:
        eps = optimize.brentq(targeting_score, -threshold, threshold, args=(y, logit_hat, w), xtol=1e-14)
    for _ in range(5):
        p = expit(eps + logit_hat)
        slope = -(w * p * (1 - p)).sum()
        score = targeting_score(eps, y, logit_hat, w)
        if slope == 0 or abs(score) < 1e-12:
            break
        eps = float(np.clip(eps - score / slope, -threshold, threshold))
    return TargetingResult(float(eps), False, targeting_score(eps, y, logit_hat, w))


def target(
    y: np.ndarray,
    y_hat: np.ndarray,
    weights: WeightSet | np.ndarray,
    threshold: float = 10.0,
) -> float:
    """Targeting intercept ε."""
    return solve_targeting(y, y_hat, weights, threshold).epsilon


# ── Estimate and variance ─────────────────────────────────────


def estimate_psi(model: OutcomeModel, sampled: list[Panel], epsilon: float) -> float:
    """ψ̂ = mean over copies and individuals of expit(logit Ŷ*_il(T) + ε).

    Copies are summed in list order.
    """
    if not sampled:
        raise ValueError("Monte Carlo estimate needs at least one sampled copy")
    total = 0.0
    records = 0
    for copy in sampled:
        targeted = expit(logit(model.predict_final(copy)) + epsilon)
        total += float(targeted.sum())
        records += len(targeted)
    return total / records


def estimate_variance(
    y: np.ndarray,
    y_hat: np.ndarray,
    weights: WeightSet | np.ndarray,
    closure: SecondOrderClosure,
) -> tuple[float, float]:
    """Direct variance mean((W(Y−Ŷ))²) and latent variance r·𝒢·r / N."""
    w = weights.w if isinstance(weights, WeightSet) else np.asarray(weights, dtype=np.float64)
    r = w * (np.asarray(y, dtype=np.float64) - np.asarray(y_hat, dtype=np.float64))
    n = len(r)
    if closure.reach.shape != (n, n):
        raise ValueError(f"closure has shape {closure.reach.shape}, expected ({n}, {n})")
    sigma_d2 = float(r @ r) / n
    sigma_l2 = float(r @ (closure.reach.astype(np.float64) @ r)) / n
    return sigma_d2, sigma_l2


def confidence_interval(psi_hat: float, sigma2: float, n: int, alpha: float = 0.05) -> tuple[float, float]:
    """ψ̂ ∓ z_{1−α/2}·sqrt(σ²/n)."""
    if sigma2 < 0:
        raise ValueError(f"sigma2 must be nonnegative, got {sigma2}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    half = stats.norm.ppf(1.0 - alpha / 2.0) * np.sqrt(sigma2 / n)
    return psi_hat - half, psi_hat + half


# ── Report and orchestration ──────────────────────────────────


@dataclass
class EstimateReport:
    """One estimator run."""

    psi_hat: float
    epsilon: float
    sigma_d2: float
    sigma_l2: float
    ci_direct: tuple[float, float]
    ci_latent: tuple[float, float]
    m_copies: int
    outcome_model_kind: str
    epsilon_reset: bool = False
    weights: WeightSet | None = None
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, object]:
        out = asdict(self)
        out.pop("weights")
        out["notes"] = "; ".join(self.notes)
        return out


@contextmanager
def _step(index: int, name: str) -> Iterator[None]:
    try:
        yield
    except EstimatorStepError:
        raise
    except Exception as exc:
        raise EstimatorStepError(index, name, exc) from exc


def run_estimator(
    observed: Panel,
    network: TemporalNetwork,
    policy: PolicySpec,
    config: EstimatorConfig,
    spec: DesignSpec,
    kind: str = "glm",
    sim_config: SimConfig | None = None,
    seed: Seed = 0,
    reception_field: int | None = None,
    sampled: list[Panel] | None = None,
) -> EstimateReport:
    """Run the five estimator steps for one observed panel and policy.

    Args:
        observed: Panel with outcomes, simulated under the observational rule.
        network: Realized snapshots of the observed run; their union defines 𝒢.
        policy: Counterfactual policy to evaluate.
        config: Estimator settings, including deep training settings.
        spec: Scenario variable lists for the outcome and exposure models.
        kind: ``glm``, ``l2``, ``deep`` or ``deep_noda``.
        sim_config: Quarantine settings used when drawing the copies.
        seed: Seed for drawing copies and for deep training.
        reception_field: Overrides ``config.train.reception_field`` for deep kinds.
        sampled: Pre-drawn policy copies; drawn from ``seed`` when omitted.

    Returns:
        The EstimateReport. Any step failure raises EstimatorStepError.
    """
    if sampled is not None and not sampled:
        raise ValueError("policy-sampled copies were withheld; the estimator needs them")
    if not observed.has_outcomes:
        raise ValueError("observed panel has no outcomes")
    root = as_seed_sequence(seed)
    copy_seed, train_seed = root.spawn(2)
    notes: list[str] = []

    with _step(1, "outcome model"):
        if sampled is None:
            sampled = sample_policy_copies(
                observed,
                network,
                policy,
                config.m_copies,
                copy_seed,
                sim_config,
                config.max_sampled_records,
            )
        model = fit_outcome(
            observed,
            kind,
            spec,
            config,
            sampled,
            reception_field=reception_field,
            seed=int(train_seed.generate_state(1)[0]),
        )
        y_hat = model.predict_final(observed)

    with _step(2, "weights"):
        weights = estimate_iptw(
            observed, sampled, spec, config.weight_bounds, config.l2_penalty, config.positivity_floor
        )
        notes.append(weights.diagnostics())

    y = observed.upsilon.astype(np.float64)
    with _step(3, "targeting"):
        targeting = solve_targeting(y, y_hat, weights, config.epsilon_threshold)
        if targeting.reset:
            notes.append("epsilon_reset")

    with _step(4, "monte carlo"):
        psi_hat = estimate_psi(model, sampled, targeting.epsilon)

    with _step(5, "variance"):
        targeted = expit(logit(y_hat) + targeting.epsilon)
        sigma_d2, sigma_l2 = estimate_variance(y, targeted, weights, second_order_closure(network))
        if sigma_l2 < 0:
            notes.append(f"sigma_l2_negative={sigma_l2:.4g}")
        n = observed.n
        ci_direct = confidence_interval(psi_hat, sigma_d2, n, config.ci_alpha)
        ci_latent = confidence_interval(psi_hat, max(sigma_l2, 0.0), n, config.ci_alpha)

    logger.debug("%s %s: psi_hat=%.4f epsilon=%.4f", model.label, policy.label, psi_hat, targeting.epsilon)
    return EstimateReport(
        psi_hat=psi_hat,
        epsilon=targeting.epsilon,
        sigma_d2=sigma_d2,
        sigma_l2=sigma_l2,
        ci_direct=ci_direct,
        ci_latent=ci_latent,
        m_copies=len(sampled),
        outcome_model_kind=model.label,
        epsilon_reset=targeting.reset,
        weights=weights,
        notes=notes,
    )
