"""Per-individual, per-step panel records and their CSV form."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

SUSCEPTIBLE, INFECTED, RECOVERED = 0, 1, 2

FEATURE_COLUMNS = (
    "alpha",
    "alpha_s",
    "xi_static",
    "xi_inf_nbrs",
    "xi_quar_hist",
    "xi_s_mean",
    "xi_s_infsum",
)

CSV_COLUMNS = [
    "rep",
    "t",
    "node",
    "alpha",
    "alpha_s",
    "state",
    "xi_static",
    "xi_inf_nbrs",
    "xi_quar_hist",
    "xi_s_mean",
    "xi_s_infsum",
    "upsilon_final",
]

_DYNAMIC = ("alpha", "alpha_s", "xi_inf_nbrs", "xi_quar_hist", "xi_s_mean", "xi_s_infsum")


@dataclass
class Panel:
    """Exposures, covariates, and outcomes over steps 0..T.

    Time-indexed arrays have shape (T+1, n). ``xi_static`` is per individual.
    Policy-sampled copies leave ``state``, ``upsilon`` and ``in_quarantine``
    unset: they carry exposures and covariates only.
    """

    alpha: np.ndarray
    alpha_s: np.ndarray
    xi_static: np.ndarray
    xi_inf_nbrs: np.ndarray
    xi_quar_hist: np.ndarray
    xi_s_mean: np.ndarray
    xi_s_infsum: np.ndarray
    state: np.ndarray | None = None
    upsilon: np.ndarray | None = None
    in_quarantine: np.ndarray | None = None

    def __post_init__(self) -> None:
        shape = self.alpha.shape
        if len(shape) != 2:
            raise ValueError(f"alpha must be (T+1, n), got shape {shape}")
        for name in _DYNAMIC:
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if self.xi_static.shape != (shape[1],):
            raise ValueError(f"xi_static has shape {self.xi_static.shape}, expected ({shape[1]},)")
        if self.state is not None and self.state.shape != shape:
            raise ValueError(f"state has shape {self.state.shape}, expected {shape}")
        if self.upsilon is not None and self.upsilon.shape != (shape[1],):
            raise ValueError(f"upsilon has shape {self.upsilon.shape}, expected ({shape[1]},)")

    @property
    def n(self) -> int:
        return self.alpha.shape[1]

    @property
    def time_horizon(self) -> int:
        return self.alpha.shape[0] - 1

    @property
    def has_outcomes(self) -> bool:
        return self.upsilon is not None

    def column(self, name: str, t: int) -> np.ndarray:
        """Values of one feature at step t, as floats."""
        if name not in FEATURE_COLUMNS:
            raise ValueError(f"unknown panel variable {name!r}; known: {', '.join(FEATURE_COLUMNS)}")
        if name == "xi_static":
            return self.xi_static.astype(np.float64)
        return getattr(self, name)[t].astype(np.float64)

    def features(self, t: int) -> np.ndarray:
        """(n, 7) matrix of FEATURE_COLUMNS at step t."""
        return np.column_stack([self.column(name, t) for name in FEATURE_COLUMNS])

    def window(self, reception_field: int) -> np.ndarray:
        """(n, T_r, 7) features over the last ``reception_field`` steps, oldest first."""
        horizon = self.time_horizon
        if not 1 <= reception_field <= horizon + 1:
            raise ValueError(f"reception_field must lie in 1..{horizon + 1}, got {reception_field}")
        steps = range(horizon - reception_field + 1, horizon + 1)
        return np.stack([self.features(t) for t in steps], axis=1)

    def to_frame(self, rep: int = 0) -> pd.DataFrame:
        steps, n = self.alpha.shape
        t_idx, node_idx = np.meshgrid(np.arange(steps), np.arange(n), indexing="ij")
        frame = pd.DataFrame(
            {
                "rep": rep,
                "t": t_idx.ravel(),
                "node": node_idx.ravel(),
                "alpha": self.alpha.ravel(),
                "alpha_s": self.alpha_s.ravel(),
                "state": self.state.ravel() if self.state is not None else pd.NA,
                "xi_static": np.broadcast_to(self.xi_static, (steps, n)).ravel(),
                "xi_inf_nbrs": self.xi_inf_nbrs.ravel(),
                "xi_quar_hist": self.xi_quar_hist.ravel(),
                "xi_s_mean": self.xi_s_mean.ravel(),
                "xi_s_infsum": self.xi_s_infsum.ravel(),
                "upsilon_final": (
                    np.broadcast_to(self.upsilon, (steps, n)).ravel()
                    if self.upsilon is not None
                    else pd.NA
                ),
            }
        )
        return frame[CSV_COLUMNS]

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> Panel:
        """Rebuild a panel from rows of a single replicate."""
        missing = set(CSV_COLUMNS) - set(frame.columns)
        if missing:
            raise ValueError(f"panel frame lacks columns {sorted(missing)}")
        if frame["rep"].nunique() > 1:
            raise ValueError("panel frame holds more than one replicate; filter by rep first")
        frame = frame.sort_values(["t", "node"])
        steps = int(frame["t"].max()) + 1
        n = int(frame["node"].max()) + 1
        if len(frame) != steps * n:
            raise ValueError(f"panel frame has {len(frame)} rows, expected {steps * n}")

        def grid(name: str, dtype: type) -> np.ndarray:
            return frame[name].to_numpy(dtype=dtype).reshape(steps, n)

        has_state = frame["state"].notna().all()
        has_outcome = frame["upsilon_final"].notna().all()
        return cls(
            alpha=grid("alpha", np.int64),
            alpha_s=grid("alpha_s", np.int64),
            xi_static=grid("xi_static", np.float64)[0],
            xi_inf_nbrs=grid("xi_inf_nbrs", np.float64),
            xi_quar_hist=grid("xi_quar_hist", np.float64),
            xi_s_mean=grid("xi_s_mean", np.float64),
            xi_s_infsum=grid("xi_s_infsum", np.float64),
            state=grid("state", np.int64) if has_state else None,
            upsilon=grid("upsilon_final", np.int64)[0] if has_outcome else None,
        )


def write_panel_csv(panels: list[Panel], path: str | Path) -> None:
    """Write replicates 0..k-1 to one CSV, one row per (rep, t, node)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frames = [panel.to_frame(rep=rep) for rep, panel in enumerate(panels)]
    pd.concat(frames, ignore_index=True).to_csv(path, index=False)


def read_panel_csv(path: str | Path) -> list[Panel]:
    frame = pd.read_csv(path)
    return [Panel.from_frame(group) for _, group in frame.groupby("rep", sort=True)]
