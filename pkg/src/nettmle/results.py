"""CSV-backed result stores: per-run rows, counterfactual truths, summaries, and series."""

from __future__ import annotations

import csv
import logging
from pathlib import Path
from typing import Any

import pandas as pd

from nettmle.evaluation import METRICS, SUMMARY_COLUMNS

logger = logging.getLogger(__name__)

RUN_COLUMNS = [
    "run_id",
    "graph",
    "n",
    "scenario",
    "policy",
    "p_omega",
    "budget",
    "priority",
    "model",
    "psi_hat",
    "epsilon",
    "sigma_d2",
    "sigma_l2",
    "lci_d",
    "uci_d",
    "lci_l",
    "uci_l",
    "m_copies",
    "notes",
    "rep",
]

TRUTH_COLUMNS = [
    "truth_id",
    "graph",
    "n",
    "policy",
    "p_omega",
    "budget",
    "priority",
    "rep",
    "psi_truth",
    "n_reps",
]

SERIES_FACETS = ("graph", "n", "scenario", "budget", "priority", "model")

RUNS_FILE = "runs.csv"
TRUTH_FILE = "truth.csv"
SUMMARY_FILE = "summary.csv"
IMPROVEMENT_FILE = "improvement.csv"
IMPROVEMENT_OVERALL_FILE = "improvement_overall.csv"


def _ensure_csv(path: Path, columns: list[str]) -> Path:
    """Create the CSV with its header if it doesn't exist."""
    path.parent.mkdir(parents=True, exist_ok=True)
    if not path.exists():
        with open(path, "w", newline="") as f:
            csv.writer(f).writerow(columns)
    return path


def _append(path: Path, columns: list[str], row: dict[str, Any]) -> None:
    _ensure_csv(path, columns)
    with open(path, "a", newline="") as f:
        csv.writer(f).writerow([_format(row.get(c, "")) for c in columns])


def _format(value: Any) -> Any:
    if isinstance(value, float):
        return repr(float(value))
    return value


def record_run(row: dict[str, Any], csv_path: Path) -> None:
    """Append one estimator run (or a failed run with notes) to the run CSV."""
    _append(csv_path, RUN_COLUMNS, row)


def record_truth(row: dict[str, Any], csv_path: Path) -> None:
    _append(csv_path, TRUTH_COLUMNS, row)


def _load(path: Path, columns: list[str]) -> pd.DataFrame:
    if not path.exists():
        return pd.DataFrame(columns=columns)
    return pd.read_csv(path, keep_default_na=True)


def load_runs(csv_path: Path) -> pd.DataFrame:
    """Run CSV as a DataFrame; empty with the right columns if missing.

    A run id recorded more than once (a failed run retried on resume) keeps
    only its last row.
    """
    runs = _load(csv_path, RUN_COLUMNS)
    return runs.drop_duplicates("run_id", keep="last").reset_index(drop=True)


def load_truths(csv_path: Path) -> pd.DataFrame:
    return _load(csv_path, TRUTH_COLUMNS)


def completed_run_ids(csv_path: Path) -> set[str]:
    """Ids of runs with an estimate; failed runs are left for a resume to retry."""
    runs = load_runs(csv_path)
    return set(runs.loc[runs["psi_hat"].notna(), "run_id"].astype(str))


def completed_truth_ids(csv_path: Path) -> set[str]:
    truths = load_truths(csv_path)
    return set(truths["truth_id"].astype(str))


def write_table(frame: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False)
    return path


def _facet_name(metric: str, facet: dict[str, Any]) -> str:
    parts = [f"{k}={v}" for k, v in facet.items()]
    return "__".join([metric, *parts]).replace("/", "_").replace("@", "-") + ".csv"


def emit_series(
    summary_path: Path,
    metric: str,
    facet_keys: tuple[str, ...] = SERIES_FACETS,
    out_dir: Path | None = None,
    where: dict[str, Any] | None = None,
    html: bool = False,
) -> list[Path]:
    """Write one ``p_omega,value`` file per facet of the summary, sorted by p_omega.

    Args:
        summary_path: Summary CSV written by a sweep.
        metric: One of bias, ese, cover_direct, cover_latent.
        facet_keys: Summary columns that identify one series.
        out_dir: Target directory; defaults to ``series/`` next to the summary.
        where: Optional column filter; a filter matching nothing yields a
            header-only file and a warning.
        html: Also write a plotly chart next to each series file.

    Returns:
        Paths of the series files written.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; expected one of {', '.join(METRICS)}")
    summary = pd.read_csv(summary_path) if summary_path.exists() else pd.DataFrame(columns=SUMMARY_COLUMNS)
    out_dir = out_dir or summary_path.parent / "series"
    out_dir.mkdir(parents=True, exist_ok=True)

    if where:
        for key, value in where.items():
            column = summary[key]
            if pd.api.types.is_numeric_dtype(column):
                summary = summary[column == pd.to_numeric(value)]
            else:
                summary = summary[column.astype(str) == str(value)]
    if summary.empty:
        path = out_dir / _facet_name(metric, where or {})
        pd.DataFrame(columns=["p_omega", "value"]).to_csv(path, index=False)
        logger.warning("no summary rows for facet %s; wrote empty series %s", where or "(all)", path)
        return [path]

    written = []
    for keys, group in summary.groupby(list(facet_keys), sort=True):
        facet = dict(zip(facet_keys, keys))
        series = (
            group[["p_omega", metric]]
            .rename(columns={metric: "value"})
            .sort_values("p_omega", kind="stable")
        )
        path = out_dir / _facet_name(metric, facet)
        series.to_csv(path, index=False)
        written.append(path)
        if html:
            _write_chart(series, metric, facet, path.with_suffix(".html"))
    logger.info("wrote %d %s series to %s", len(written), metric, out_dir)
    return written


def _write_chart(series: pd.DataFrame, metric: str, facet: dict[str, Any], path: Path) -> None:
    import plotly.graph_objects as go

    fig = go.Figure()
    fig.add_trace(go.Scatter(x=series["p_omega"], y=series["value"], mode="lines+markers", name=metric))
    fig.update_layout(
        title=dict(text=" / ".join(f"{k}={v}" for k, v in facet.items())),
        xaxis=dict(title="p_omega"),
        yaxis=dict(title=metric),
    )
    fig.write_html(path)
