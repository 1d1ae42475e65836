"""Outcome learners: benchmark GLMs and the adversarial MLP."""

from nettmle.config import EstimatorConfig
from nettmle.design import DesignSpec
from nettmle.models.base import OutcomeModel
from nettmle.models.outcome import DeepOutcomeModel, GlmOutcomeModel

__all__ = ["OutcomeModel", "GlmOutcomeModel", "DeepOutcomeModel", "build_outcome_model"]


def build_outcome_model(
    kind: str,
    spec: DesignSpec,
    config: EstimatorConfig,
    reception_field: int | None = None,
    seed: int | None = None,
) -> OutcomeModel:
    """Unfitted outcome model of the given kind (glm, l2, deep, deep_noda)."""
    if kind in ("glm", "l2"):
        return GlmOutcomeModel(spec, config, kind=kind)
    if kind in ("deep", "deep_noda"):
        return DeepOutcomeModel(spec, config, kind=kind, reception_field=reception_field, seed=seed)
    raise ValueError(f"unknown outcome model kind {kind!r}; expected glm, l2, deep or deep_noda")
