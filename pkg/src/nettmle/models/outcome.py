"""GLM and adversarial-MLP outcome models behind the OutcomeModel interface."""

from __future__ import annotations

import logging

import numpy as np

from nettmle.config import EstimatorConfig, TrainConfig
from nettmle.design import DesignSpec, build_design, encode_features, fit_bin_edges
from nettmle.models import deepnet, glm
from nettmle.models.base import OutcomeModel
from nettmle.panel import Panel

logger = logging.getLogger(__name__)


class GlmOutcomeModel(OutcomeModel):
    """Binomial GLM on final-step rows only; ``l2`` kind adds the ridge penalty."""

    def __init__(self, spec: DesignSpec, config: EstimatorConfig, kind: str = "glm"):
        if kind not in ("glm", "l2"):
            raise ValueError(f"unknown GLM kind {kind!r}")
        self.kind = kind
        self.spec = spec
        self.config = config
        self.fit_: glm.GlmFit | None = None
        self.bin_edges: dict[str, np.ndarray] = {}

    @property
    def l2_penalty(self) -> float:
        if self.kind == "l2" or self.spec.l2_penalty:
            return self.config.l2_penalty
        return 0.0

    def fit(self, observed: Panel, sampled: list[Panel] | None = None) -> GlmOutcomeModel:
        if not observed.has_outcomes:
            raise ValueError("outcome model needs a panel with final outcomes")
        horizon = observed.time_horizon
        design = build_design(observed, self.spec, horizon, "outcome")
        self.bin_edges = design.bin_edges
        self.fit_ = glm.fit(
            "binomial",
            design.matrix,
            observed.upsilon,
            l2=self.l2_penalty,
            columns=design.columns,
        )
        return self

    def predict_final(self, panel: Panel) -> np.ndarray:
        if self.fit_ is None:
            raise RuntimeError("outcome model is not fitted")
        design = build_design(panel, self.spec, panel.time_horizon, "outcome", self.bin_edges)
        bound = self.config.glm_prob_bound
        return np.clip(glm.predict(self.fit_, design.matrix), bound, 1.0 - bound)


class DeepOutcomeModel(OutcomeModel):
    """Adversarial MLP over the last T_r steps; ``deep_noda`` trains with λ ≡ 0."""

    requires_sampled = True

    def __init__(
        self,
        spec: DesignSpec,
        config: EstimatorConfig,
        kind: str = "deep",
        reception_field: int | None = None,
        seed: int | None = None,
    ):
        if kind not in ("deep", "deep_noda"):
            raise ValueError(f"unknown deep kind {kind!r}")
        self.kind = kind
        self.spec = spec
        self.config = config
        updates: dict[str, object] = {"domain_adaptation": kind == "deep"}
        if reception_field is not None:
            updates["reception_field"] = reception_field
        if seed is not None:
            updates["seed"] = seed
        self.train_config: TrainConfig = config.train.model_copy(update=updates)
        self.params: deepnet.MlpParams | None = None
        self.bin_edges: dict[str, np.ndarray] = {}

    @property
    def label(self) -> str:
        return f"{self.kind}@T{self.train_config.reception_field}"

    def _windows(self, panel: Panel) -> np.ndarray:
        return encode_features(panel.window(self.train_config.reception_field), self.spec, self.bin_edges)

    def fit(self, observed: Panel, sampled: list[Panel] | None = None) -> DeepOutcomeModel:
        if not observed.has_outcomes:
            raise ValueError("outcome model needs a panel with final outcomes")
        if not sampled:
            raise ValueError(f"{self.kind} outcome model needs policy-sampled copies for training")
        horizon = observed.time_horizon
        self.bin_edges = fit_bin_edges(observed, self.spec, horizon)
        labeled = deepnet.WindowSet(
            windows=self._windows(observed),
            alpha=observed.alpha[horizon].astype(np.float64),
            upsilon=observed.upsilon.astype(np.float64),
        )
        unlabeled = deepnet.WindowSet(
            windows=np.concatenate([self._windows(copy) for copy in sampled]),
            alpha=np.concatenate([copy.alpha[horizon] for copy in sampled]).astype(np.float64),
        )
        self.params = deepnet.train(labeled, unlabeled, self.train_config)
        return self

    def predict_final(self, panel: Panel) -> np.ndarray:
        if self.params is None:
            raise RuntimeError("outcome model is not fitted")
        return deepnet.predict_outcome(self.params, self._windows(panel), clip=self.config.deep_clip)
