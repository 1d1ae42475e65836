"""Quarantine ledger: activations, expiry, and edge bookkeeping on the contact network."""

from dataclasses import dataclass

import numpy as np


@dataclass
class ActiveQuarantine:
    """One quarantine activation."""

    node: int
    started_at: int
    period: int

    @property
    def ends_at(self) -> int:
        """Last step (inclusive) during which the node is isolated."""
        return self.started_at + self.period - 1


class QuarantineEngine:
    """Tracks who is quarantined when, and realizes the isolated snapshots.

    A node activated at step t₀ is isolated for steps t₀..t₀+P−1. Nodes in an
    ongoing quarantine are not eligible for a new activation; with
    ``allow_requarantine=False`` a node can be activated only once.
    """

    def __init__(self, n: int, period: int, allow_requarantine: bool = True):
        if period < 1:
            raise ValueError(f"quarantine period must be >= 1, got {period}")
        self.n = n
        self.period = period
        self.allow_requarantine = allow_requarantine
        self._until = np.full(n, -1, dtype=np.int64)
        self._activations = np.zeros(n, dtype=np.int64)
        self.history: list[ActiveQuarantine] = []

    def eligible(self, t: int) -> np.ndarray:
        """Nodes that may be newly quarantined at step t."""
        free = self._until < t
        if not self.allow_requarantine:
            free &= self._activations == 0
        return free

    def activate(self, alpha: np.ndarray, t: int) -> list[ActiveQuarantine]:
        """Start quarantines for every node with alpha == 1 at step t."""
        nodes = np.flatnonzero(alpha)
        if len(nodes) and not self.eligible(t)[nodes].all():
            blocked = nodes[~self.eligible(t)[nodes]].tolist()
            raise ValueError(f"nodes {blocked} are not eligible for quarantine at t={t}")
        self._until[nodes] = t + self.period - 1
        self._activations[nodes] += 1
        started = [ActiveQuarantine(node=int(i), started_at=t, period=self.period) for i in nodes]
        self.history.extend(started)
        return started

    def active(self, t: int) -> np.ndarray:
        """Boolean mask of nodes isolated at step t."""
        return self._until >= t

    def activation_counts(self) -> np.ndarray:
        return self._activations.copy()

    @staticmethod
    def isolate(base: np.ndarray, quarantined: np.ndarray) -> np.ndarray:
        """Copy of ``base`` with every edge touching a quarantined node removed."""
        snapshot = base.copy()
        snapshot[quarantined, :] = False
        snapshot[:, quarantined] = False
        return snapshot
