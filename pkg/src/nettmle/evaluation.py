"""Evaluation metrics over repeated runs: bias, ESE, and CI coverage."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import pandas as pd

CELL_KEYS = ["graph", "n", "scenario", "policy", "p_omega", "budget", "priority", "model"]
SUMMARY_COLUMNS = [*CELL_KEYS, "U", "bias", "ese", "cover_direct", "cover_latent"]
TRUTH_KEYS = ["graph", "n", "policy", "rep"]
METRICS = ("bias", "ese", "cover_direct", "cover_latent")


@dataclass
class RunBatch:
    """Estimates, truths, and both intervals over U repeated runs."""

    psi_hat: np.ndarray
    psi_truth: np.ndarray
    lci_d: np.ndarray
    uci_d: np.ndarray
    lci_l: np.ndarray
    uci_l: np.ndarray

    def __post_init__(self) -> None:
        fields = (self.psi_hat, self.psi_truth, self.lci_d, self.uci_d, self.lci_l, self.uci_l)
        arrays = [np.asarray(a, dtype=np.float64) for a in fields]
        (self.psi_hat, self.psi_truth, self.lci_d, self.uci_d, self.lci_l, self.uci_l) = arrays
        if len(self.psi_hat) < 1:
            raise ValueError("a run batch needs at least one run")
        if len({len(a) for a in arrays}) != 1:
            raise ValueError("all run-batch columns must have the same length")
        if (self.lci_d > self.uci_d).any() or (self.lci_l > self.uci_l).any():
            raise ValueError("interval lower bound exceeds upper bound")

    @property
    def size(self) -> int:
        return len(self.psi_hat)

    @property
    def errors(self) -> np.ndarray:
        return self.psi_hat - self.psi_truth

    @classmethod
    def from_entries(cls, entries: list[tuple[float, float, float, float, float, float]]) -> RunBatch:
        """Build from (psi_hat, psi_truth, lci_d, uci_d, lci_l, uci_l) tuples."""
        if not entries:
            raise ValueError("a run batch needs at least one run")
        return cls(*np.asarray(entries, dtype=np.float64).T)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> RunBatch:
        return cls(
            psi_hat=frame["psi_hat"].to_numpy(),
            psi_truth=frame["psi_truth"].to_numpy(),
            lci_d=frame["lci_d"].to_numpy(),
            uci_d=frame["uci_d"].to_numpy(),
            lci_l=frame["lci_l"].to_numpy(),
            uci_l=frame["uci_l"].to_numpy(),
        )


def bias(batch: RunBatch) -> float:
    """Mean of ψ̂_k − ψ_k."""
    return float(batch.errors.mean())


def ese(batch: RunBatch) -> float:
    """Population standard deviation (divisor U) of the per-run errors."""
    errors = batch.errors
    return float(np.sqrt(((errors - errors.mean()) ** 2).mean()))


def coverage(batch: RunBatch, which: Literal["direct", "latent"] = "direct") -> float:
    """Share of runs with LCI < ψ < UCI, both inequalities strict."""
    if which == "direct":
        lo, hi = batch.lci_d, batch.uci_d
    elif which == "latent":
        lo, hi = batch.lci_l, batch.uci_l
    else:
        raise ValueError(f"unknown interval {which!r}; expected 'direct' or 'latent'")
    return float(((lo < batch.psi_truth) & (hi > batch.psi_truth)).mean())


def summarize(runs: pd.DataFrame, truths: pd.DataFrame) -> pd.DataFrame:
    """One summary row per grid cell from the run and truth tables.

    Failed runs (no ψ̂) and runs without a recorded truth are left out.
    """
    if runs.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    truth_cols = truths[[*TRUTH_KEYS, "psi_truth"]].drop_duplicates(TRUTH_KEYS)
    joined = runs.merge(truth_cols, on=TRUTH_KEYS, how="inner")
    joined = joined[joined["psi_hat"].notna()]

    rows = []
    for keys, group in joined.groupby(CELL_KEYS, sort=True):
        batch = RunBatch.from_frame(group)
        rows.append(
            [
                *keys,
                batch.size,
                bias(batch),
                ese(batch),
                coverage(batch, "direct"),
                coverage(batch, "latent"),
            ]
        )
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def improvement(summary: pd.DataFrame, baseline: str, candidate: str) -> pd.DataFrame:
    """Per-cell gain of ``candidate`` over ``baseline``; positive values favour the candidate.

    Columns: the cell keys without ``model``, then gain_abs_bias
    (|bias_b| − |bias_c|), gain_ese (ese_b − ese_c), and gain_cover_direct,
    gain_cover_latent (cover_c − cover_b).
    """
    keys = [k for k in CELL_KEYS if k != "model"]
    base = summary[summary["model"] == baseline].set_index(keys)
    cand = summary[summary["model"] == candidate].set_index(keys)
    both = base.join(cand, how="inner", lsuffix="_b", rsuffix="_c")
    out = pd.DataFrame(index=both.index)
    out["baseline"] = baseline
    out["candidate"] = candidate
    out["gain_abs_bias"] = both["bias_b"].abs() - both["bias_c"].abs()
    out["gain_ese"] = both["ese_b"] - both["ese_c"]
    out["gain_cover_direct"] = both["cover_direct_c"] - both["cover_direct_b"]
    out["gain_cover_latent"] = both["cover_latent_c"] - both["cover_latent_b"]
    return out.reset_index()


GAIN_COLUMNS = ["gain_abs_bias", "gain_ese", "gain_cover_direct", "gain_cover_latent"]
OVERALL_KEYS = ["graph", "n", "budget", "priority", "baseline", "candidate"]


def improvement_overall(table: pd.DataFrame) -> pd.DataFrame:
    """Gains from ``improvement`` averaged over scenarios and p_omega values.

    One row per (graph, n, budget, priority, baseline, candidate), with the
    number of cells averaged in ``cells``.
    """
    if table.empty:
        return pd.DataFrame(columns=[*OVERALL_KEYS, "cells", *GAIN_COLUMNS])
    grouped = table.groupby(OVERALL_KEYS, sort=True)
    out = grouped[GAIN_COLUMNS].mean()
    out.insert(0, "cells", grouped.size())
    return out.reset_index()
