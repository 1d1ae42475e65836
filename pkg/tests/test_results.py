"""Tests for the run/truth CSV stores and series emission."""

import csv
import logging

import pandas as pd
import pytest

from nettmle.evaluation import SUMMARY_COLUMNS
from nettmle.results import (
    RUN_COLUMNS,
    TRUTH_COLUMNS,
    completed_run_ids,
    completed_truth_ids,
    emit_series,
    load_runs,
    record_run,
    record_truth,
    write_table,
)


def _run_row(run_id: str, psi_hat) -> dict:
    return {
        "run_id": run_id,
        "graph": "uniform",
        "n": 500,
        "scenario": "CC",
        "policy": "p0.50-b1-all",
        "p_omega": 0.5,
        "budget": 1.0,
        "priority": "all",
        "model": "glm",
        "psi_hat": psi_hat,
        "notes": "",
        "rep": 0,
    }


# ── Run and truth stores ────────────────────────────────────


def test_record_run_writes_header_once(tmp_path):
    path = tmp_path / "runs.csv"
    record_run(_run_row("a", 0.31), path)
    record_run(_run_row("b", 0.29), path)
    with open(path) as f:
        rows = list(csv.reader(f))
    assert rows[0] == RUN_COLUMNS
    assert len(rows) == 3


def test_floats_round_trip_exactly(tmp_path):
    path = tmp_path / "runs.csv"
    value = 0.1 + 0.2
    record_run(_run_row("a", value), path)
    with open(path) as f:
        row = next(csv.DictReader(f))
    assert float(row["psi_hat"]) == value


def test_failed_run_has_blank_estimate(tmp_path):
    path = tmp_path / "runs.csv"
    row = _run_row("a", "")
    row["notes"] = "failed: SingularDesignError: step 1"
    record_run(row, path)
    runs = load_runs(path)
    assert pd.isna(runs["psi_hat"].iloc[0])
    assert runs["notes"].iloc[0].startswith("failed:")


def test_missing_stores_load_empty(tmp_path):
    runs = load_runs(tmp_path / "absent.csv")
    assert runs.empty
    assert list(runs.columns) == RUN_COLUMNS
    assert completed_run_ids(tmp_path / "absent.csv") == set()


def test_completed_ids(tmp_path):
    runs, truths = tmp_path / "runs.csv", tmp_path / "truth.csv"
    record_run(_run_row("uniform-n500-CC-p0.50-b1-all-glm-k0", 0.3), runs)
    record_truth({"truth_id": "uniform-n500-p0.50-b1-all-k0", "psi_truth": 0.2, "n_reps": 30}, truths)
    assert completed_run_ids(runs) == {"uniform-n500-CC-p0.50-b1-all-glm-k0"}
    assert completed_truth_ids(truths) == {"uniform-n500-p0.50-b1-all-k0"}
    assert list(pd.read_csv(truths).columns) == TRUTH_COLUMNS



def test_failed_runs_are_not_completed(tmp_path):
    path = tmp_path / "runs.csv"
    record_run(_run_row("ok", 0.3), path)
    failed = _run_row("retry", "")
    failed["notes"] = "failed: RuntimeError: boom"
    record_run(failed, path)
    assert completed_run_ids(path) == {"ok"}


def test_retried_run_keeps_its_last_row(tmp_path):
    path = tmp_path / "runs.csv"
    failed = _run_row("a", "")
    failed["notes"] = "failed: RuntimeError: boom"
    record_run(failed, path)
    record_run(_run_row("b", 0.2), path)
    record_run(_run_row("a", 0.4), path)
    runs = load_runs(path)
    assert runs["run_id"].tolist() == ["b", "a"]
    assert runs["psi_hat"].tolist() == [0.2, 0.4]
    assert completed_run_ids(path) == {"a", "b"}


# ── Series ──────────────────────────────────────────────────


def _summary(tmp_path):
    rows = []
    for model in ("glm", "deep@T9"):
        for p in (0.9, 0.1, 0.5):
            rows.append(
                {
                    "graph": "uniform",
                    "n": 500,
                    "scenario": "CC",
                    "policy": f"p{p:.2f}-b1-all",
                    "p_omega": p,
                    "budget": 1.0,
                    "priority": "all",
                    "model": model,
                    "U": 30,
                    "bias": p / 10 if model == "glm" else -p / 10,
                    "ese": 0.02,
                    "cover_direct": 0.9,
                    "cover_latent": 0.95,
                }
            )
    return write_table(pd.DataFrame(rows, columns=SUMMARY_COLUMNS), tmp_path / "summary.csv")


def test_series_one_file_per_facet_sorted(tmp_path):
    paths = emit_series(_summary(tmp_path), "bias")
    assert len(paths) == 2
    glm = next(p for p in paths if "model=glm" in p.name)
    series = pd.read_csv(glm)
    assert list(series.columns) == ["p_omega", "value"]
    assert series["p_omega"].tolist() == [0.1, 0.5, 0.9]
    assert series["value"].tolist() == pytest.approx([0.01, 0.05, 0.09])


def test_series_filter(tmp_path):
    paths = emit_series(_summary(tmp_path), "ese", where={"model": "deep@T9"}, out_dir=tmp_path / "out")
    assert len(paths) == 1
    assert paths[0].parent == tmp_path / "out"
    assert "model=deep-T9" in paths[0].name


def test_series_filter_matches_numeric_columns_by_value(tmp_path):
    """A budget given as "1" or 1 selects the stored 1.0; n given as "500" selects 500."""
    summary = _summary(tmp_path)
    for where in ({"budget": "1"}, {"budget": 1}, {"n": "500", "model": "glm"}):
        paths = emit_series(summary, "bias", where=where, out_dir=tmp_path / "out")
        assert all(len(pd.read_csv(p)) == 3 for p in paths)


def test_series_empty_facet_warns(tmp_path, caplog):
    with caplog.at_level(logging.WARNING, logger="nettmle.results"):
        paths = emit_series(_summary(tmp_path), "bias", where={"n": 2000})
    assert len(paths) == 1
    assert paths[0].read_text().strip() == "p_omega,value"
    assert "no summary rows" in caplog.text


def test_series_rejects_unknown_metric(tmp_path):
    with pytest.raises(ValueError, match="mse"):
        emit_series(_summary(tmp_path), "mse")


def test_series_html_chart(tmp_path):
    pytest.importorskip("plotly")
    paths = emit_series(_summary(tmp_path), "cover_latent", html=True)
    assert all(p.with_suffix(".html").exists() for p in paths)
