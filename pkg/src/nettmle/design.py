"""Model-specification scenarios and design-matrix construction from panels."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field

from nettmle.panel import FEATURE_COLUMNS, Panel

ModelRole = Literal["outcome", "exposure", "summary"]

N_QUANTILE_BINS = 4


# ── Scenario definitions ──────────────────────────────────────


class DesignSpec(BaseModel):
    """Which variables enter the outcome, exposure, and summary-exposure models."""

    scenario: str
    description: str
    outcome_vars: list[str]
    exposure_vars: list[str]
    summary_vars: list[str]
    binned_vars: list[str] = Field(default_factory=list)
    l2_penalty: bool = False

    def variables(self, role: ModelRole) -> list[str]:
        if role == "outcome":
            return self.outcome_vars
        if role == "exposure":
            return self.exposure_vars
        if role == "summary":
            return self.summary_vars
        raise ValueError(f"unknown model role {role!r}")


_CONFOUNDERS = ["xi_static", "xi_inf_nbrs", "xi_quar_hist", "xi_s_mean", "xi_s_infsum"]

CC = DesignSpec(
    scenario="CC",
    description="Exposure and outcome models both correctly specified.",
    outcome_vars=list(FEATURE_COLUMNS),
    exposure_vars=list(_CONFOUNDERS),
    summary_vars=["alpha", *_CONFOUNDERS],
)

CW = DesignSpec(
    scenario="CW",
    description="Correct exposure model; outcome model omits the infected-neighbour count.",
    outcome_vars=[v for v in FEATURE_COLUMNS if v != "xi_inf_nbrs"],
    exposure_vars=list(_CONFOUNDERS),
    summary_vars=["alpha", *_CONFOUNDERS],
)

WC = DesignSpec(
    scenario="WC",
    description="Correct outcome model; exposure models omit the summary covariates.",
    outcome_vars=list(FEATURE_COLUMNS),
    exposure_vars=["xi_static", "xi_inf_nbrs", "xi_quar_hist"],
    summary_vars=["alpha", "xi_static", "xi_inf_nbrs", "xi_quar_hist"],
)

FLEXIBLE = DesignSpec(
    scenario="Flexible",
    description="Continuous variables discretized into quartile indicators; L2-penalized fits.",
    outcome_vars=list(FEATURE_COLUMNS),
    exposure_vars=list(_CONFOUNDERS),
    summary_vars=["alpha", *_CONFOUNDERS],
    binned_vars=["xi_static", "xi_inf_nbrs", "xi_s_mean", "xi_s_infsum"],
    l2_penalty=True,
)

SCENARIOS: dict[str, DesignSpec] = {s.scenario: s for s in (CC, CW, WC, FLEXIBLE)}


def get_scenario(name: str) -> DesignSpec:
    try:
        return SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; known: {', '.join(SCENARIOS)}") from None


# ── Design matrices ───────────────────────────────────────────


@dataclass
class Design:
    """Predictor matrix (no intercept column) with its column names."""

    matrix: np.ndarray
    columns: list[str]
    bin_edges: dict[str, np.ndarray] = field(default_factory=dict)


def quantile_edges(values: np.ndarray, n_bins: int = N_QUANTILE_BINS) -> np.ndarray:
    """Interior quantile cut points, deduplicated."""
    qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
    return np.unique(np.quantile(np.asarray(values, dtype=np.float64), qs))


def bin_codes(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin index 0..len(edges) of each value; a value equal to an edge goes up."""
    return np.searchsorted(edges, values, side="right")


def fit_bin_edges(panel: Panel, spec: DesignSpec, t: int) -> dict[str, np.ndarray]:
    """Quartile edges of every binned variable, computed on ``panel`` at step t."""
    return {name: quantile_edges(panel.column(name, t)) for name in spec.binned_vars}


def build_design(
    panel: Panel,
    spec: DesignSpec,
    t: int,
    role: ModelRole = "outcome",
    bin_edges: dict[str, np.ndarray] | None = None,
) -> Design:
    """Design matrix for one model at step t.

    Binned variables expand into indicator columns for every non-reference
    bin. Pass the observed panel's ``bin_edges`` when building copies so that
    the bins are never re-estimated on counterfactual data.
    """
    if spec.binned_vars and bin_edges is None:
        bin_edges = fit_bin_edges(panel, spec, t)
    bin_edges = bin_edges or {}

    blocks: list[np.ndarray] = []
    columns: list[str] = []
    for name in spec.variables(role):
        values = panel.column(name, t)
        if name in spec.binned_vars:
            edges = bin_edges[name]
            codes = bin_codes(values, edges)
            for level in range(1, len(edges) + 1):
                blocks.append((codes == level).astype(np.float64))
                columns.append(f"{name}[q{level}]")
        else:
            blocks.append(values)
            columns.append(name)
    matrix = np.column_stack(blocks) if blocks else np.empty((panel.n, 0))
    return Design(matrix=matrix, columns=columns, bin_edges=dict(bin_edges))


def encode_features(
    features: np.ndarray,
    spec: DesignSpec,
    bin_edges: dict[str, np.ndarray],
) -> np.ndarray:
    """Select the outcome variables from (..., 7) feature arrays for the deep model.

    Binned variables are replaced by their numeric bin codes rather than
    indicator columns.
    """
    out = []
    for name in spec.outcome_vars:
        values = features[..., FEATURE_COLUMNS.index(name)]
        if name in spec.binned_vars:
            values = bin_codes(values, bin_edges[name]).astype(np.float64)
        out.append(values)
    return np.stack(out, axis=-1)
