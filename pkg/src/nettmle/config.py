"""All tuneable parameters: graphs, epidemic, policies, estimators, and sweeps."""

from __future__ import annotations

import math
import os
from pathlib import Path
from typing import Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SUPPORTED_SIZES = (500, 1000, 2000)
DEFAULT_P_OMEGA_GRID = [round(0.05 * k, 2) for k in range(1, 20)]

GraphKind = Literal["uniform", "powerlaw"]
Scenario = Literal["CC", "CW", "WC", "Flexible"]
Priority = Literal["all", "most_connected", "least_connected"]
ModelKind = Literal["glm", "l2", "deep", "deep_noda"]


class _Section(BaseModel):
    """Base for config sections: unknown keys are rejected by name."""

    model_config = ConfigDict(extra="forbid")


class GraphConfig(_Section):
    """Random-graph generator parameters."""

    d_min: int = Field(default=1, ge=1)
    d_max: int = Field(default=6, ge=1)
    n_subgraphs: int = Field(default=5, ge=1)
    powerlaw_exponent: float = Field(default=2.5, gt=2.0)
    inter_edge_prob: float = Field(default=0.001, ge=0.0, le=1.0)
    attachment_edges: int = Field(default=2, ge=1)
    triangle_prob: float = Field(default=0.1, ge=0.0, le=1.0)
    max_retries: int = Field(default=100, ge=1)

    @model_validator(mode="after")
    def _check_degrees(self) -> GraphConfig:
        if self.d_min > self.d_max:
            raise ValueError(f"d_min={self.d_min} exceeds d_max={self.d_max}")
        return self


class AssignmentConfig(_Section):
    """Logistic coefficients of the observational quarantine-compliance rule.

    Order of the linear predictor is [1, xi_static, xi_inf_nbrs, xi_quar_hist,
    xi_s_mean, xi_s_infsum].
    """

    intercept: float = -1.5
    xi_static: float = 0.5
    xi_inf_nbrs: float = 0.6
    xi_quar_hist: float = -0.4
    xi_s_mean: float = 0.3
    xi_s_infsum: float = 0.3

    def as_vector(self) -> np.ndarray:
        return np.array(
            [
                self.intercept,
                self.xi_static,
                self.xi_inf_nbrs,
                self.xi_quar_hist,
                self.xi_s_mean,
                self.xi_s_infsum,
            ]
        )


class SimConfig(_Section):
    """SIR epidemic and quarantine parameters."""

    t_steps: int = Field(default=10, ge=1)
    infectious_duration: int = Field(default=5, ge=1)
    quarantine_period: int = Field(default=2, ge=1)
    init_infected_fraction: float = Field(default=0.01, gt=0.0, le=1.0)
    transmission_prob: float = Field(default=0.2, ge=0.0, le=1.0)
    leaky_multiplier: float = Field(default=1.0, ge=0.0, le=1.0)
    allow_requarantine: bool = True
    assignment: AssignmentConfig = Field(default_factory=AssignmentConfig)
    rng_seed: int = 42

    @property
    def leaky(self) -> bool:
        """Leaky mode keeps quarantined edges and scales their transmission."""
        return self.leaky_multiplier < 1.0

    def initial_infected_count(self, n: int) -> int:
        return min(n, math.ceil(self.init_infected_fraction * n))


class PolicySpec(_Section):
    """Exposure-probability policy: who may be quarantined and how likely."""

    p_omega: float = Field(default=0.5, ge=0.0, le=1.0)
    budget_fraction: float = Field(default=1.0, gt=0.0, le=1.0)
    priority: Priority = "all"
    mode: Literal["observational", "counterfactual"] = "counterfactual"

    @model_validator(mode="after")
    def _check_priority(self) -> PolicySpec:
        if self.priority == "all" and self.budget_fraction != 1.0:
            raise ValueError("priority 'all' requires budget_fraction=1.0")
        return self

    @classmethod
    def observational(cls) -> PolicySpec:
        return cls(mode="observational")

    @property
    def label(self) -> str:
        if self.mode == "observational":
            return "observational"
        return f"p{self.p_omega:.2f}-b{self.budget_fraction:g}-{self.priority}"

    def budget_count(self, n: int) -> int:
        return math.ceil(self.budget_fraction * n)


class TrainConfig(_Section):
    """Adversarial outcome-network training parameters."""

    reception_field: int = Field(default=9, ge=1, le=10)
    hidden_dim: int = Field(default=64, ge=1)
    n_epochs: int = Field(default=300, ge=1)
    learning_rate: float = Field(default=1e-2, gt=0.0)
    lambda_gamma: float = Field(default=10.0, ge=0.0)
    batch_size: int = Field(default=128, ge=1)
    domain_adaptation: bool = True
    seed: int = 0

    def lambda_at(self, progress: float) -> float:
        """Reversal strength λ(p) = 2/(1+exp(-γp)) - 1 for progress p in [0, 1]."""
        if not self.domain_adaptation:
            return 0.0
        return 2.0 / (1.0 + math.exp(-self.lambda_gamma * progress)) - 1.0


class EstimatorConfig(_Section):
    """Network TMLE parameters."""

    m_copies: int = Field(default=30, ge=1)
    weight_bounds: tuple[float, float] = (0.01, 100.0)
    epsilon_threshold: float = Field(default=10.0, gt=0.0)
    deep_clip: tuple[float, float] = (0.05, 0.95)
    glm_prob_bound: float = Field(default=1e-9, gt=0.0, lt=0.5)
    l2_penalty: float = Field(default=1.0, ge=0.0)
    positivity_floor: float = Field(default=1e-12, gt=0.0)
    max_sampled_records: int = Field(default=5_000_000, ge=1)
    ci_alpha: float = Field(default=0.05, gt=0.0, lt=1.0)
    train: TrainConfig = Field(default_factory=TrainConfig)

    @field_validator("weight_bounds", "deep_clip")
    @classmethod
    def _check_bounds(cls, v: tuple[float, float]) -> tuple[float, float]:
        lo, hi = v
        if not 0.0 < lo < hi:
            raise ValueError(f"bounds must satisfy 0 < low < high, got {v}")
        return v


class ExperimentSpec(_Section):
    """A sweep over graph x size x scenario x policy grids."""

    graph_kinds: list[GraphKind] = Field(default_factory=lambda: ["uniform"])
    sizes: list[int] = Field(default_factory=lambda: [500])
    scenarios: list[Scenario] = Field(default_factory=lambda: ["CC"])
    p_omega_grid: list[float] = Field(default_factory=lambda: list(DEFAULT_P_OMEGA_GRID))
    budgets: list[float] = Field(default_factory=lambda: [1.0])
    priorities: list[Priority] = Field(default_factory=lambda: ["all"])
    repeats: int = Field(default=30, ge=1)
    repeat_overrides: dict[str, int] = Field(default_factory=lambda: {"powerlaw/2000": 15})
    models: list[ModelKind] = Field(default_factory=lambda: ["glm", "deep"])
    reception_fields: list[int] = Field(default_factory=lambda: [9])
    truth_reps: int = Field(default=30, ge=1)
    master_seed: int = 0
    output_dir: str = "results"
    allow_custom_sizes: bool = False
    failure_tolerance: float = Field(default=0.10, ge=0.0, le=1.0)
    graph: GraphConfig = Field(default_factory=GraphConfig)
    sim: SimConfig = Field(default_factory=SimConfig)
    estimator: EstimatorConfig = Field(default_factory=EstimatorConfig)

    @field_validator("p_omega_grid", mode="before")
    @classmethod
    def _expand_default_grid(cls, v: Any) -> Any:
        if v == "default":
            return list(DEFAULT_P_OMEGA_GRID)
        return v

    @field_validator("p_omega_grid")
    @classmethod
    def _check_grid(cls, v: list[float]) -> list[float]:
        bad = [p for p in v if not 0.0 < p < 1.0]
        if bad:
            raise ValueError(f"p_omega_grid values must lie strictly in (0, 1): {bad}")
        return v

    @field_validator("budgets")
    @classmethod
    def _check_budgets(cls, v: list[float]) -> list[float]:
        bad = [b for b in v if not 0.0 < b <= 1.0]
        if bad:
            raise ValueError(f"budgets must lie in (0, 1]: {bad}")
        return v

    @field_validator("reception_fields")
    @classmethod
    def _check_reception_fields(cls, v: list[int]) -> list[int]:
        bad = [t for t in v if not 1 <= t <= 10]
        if bad:
            raise ValueError(f"reception_fields must lie in 1..10: {bad}")
        return v

    @model_validator(mode="after")
    def _check_sizes(self) -> ExperimentSpec:
        if not self.allow_custom_sizes:
            bad = [n for n in self.sizes if n not in SUPPORTED_SIZES]
            if bad:
                raise ValueError(
                    f"unsupported sizes {bad}; supported sizes are {list(SUPPORTED_SIZES)} "
                    "unless allow_custom_sizes=true"
                )
        return self

    def repeats_for(self, graph_kind: str, n: int) -> int:
        return self.repeat_overrides.get(f"{graph_kind}/{n}", self.repeats)

    def policy_cells(self) -> list[tuple[float, str]]:
        """Valid (budget, priority) pairs: 'all' pairs only with a full budget."""
        cells = []
        for budget in self.budgets:
            for priority in self.priorities:
                if (priority == "all") == (budget == 1.0):
                    cells.append((budget, priority))
        return cells

    @classmethod
    def from_yaml(cls, path: str | Path) -> ExperimentSpec:
        """Load a sweep spec from YAML; ``NETTMLE_OUT`` overrides output_dir."""
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {path}")
        with open(path) as f:
            data = yaml.safe_load(f) or {}
        out = os.getenv("NETTMLE_OUT")
        if out:
            data["output_dir"] = out
        return cls.model_validate(data)

    @classmethod
    def from_env(cls) -> ExperimentSpec:
        """Load from ``NETTMLE_CONFIG`` if set, else defaults."""
        config_path = os.getenv("NETTMLE_CONFIG")
        if config_path:
            return cls.from_yaml(config_path)
        spec = cls()
        out = os.getenv("NETTMLE_OUT")
        if out:
            spec.output_dir = out
        return spec


def parse_config(path: str | Path) -> ExperimentSpec:
    """Parse and validate an experiment config file."""
    return ExperimentSpec.from_yaml(path)
