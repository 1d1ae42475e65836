"""Outcome-model interface. Subclass OutcomeModel to add a new outcome learner."""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from nettmle.panel import Panel


class OutcomeModel(ABC):
    """Fitted model of the final-step outcome Ŷ_i(T).

    To add a learner:
        1. Subclass OutcomeModel and set ``kind``
        2. Implement ``fit`` and ``predict_final``
        3. Register it in ``nettmle.models.build_outcome_model``

    ``predict_final`` is the final-step selector: whatever history the model
    consumes, it returns one probability per individual for step T, already
    bounded or clipped the way targeting needs it.
    """

    kind: str = "unnamed"
    #: whether ``fit`` needs the policy-sampled copies
    requires_sampled: bool = False

    @abstractmethod
    def fit(self, observed: Panel, sampled: list[Panel] | None = None) -> OutcomeModel:
        """Fit on the observed panel; return self."""

    @abstractmethod
    def predict_final(self, panel: Panel) -> np.ndarray:
        """Predicted outcome probability at step T for every individual of ``panel``."""

    @property
    def label(self) -> str:
        return self.kind
