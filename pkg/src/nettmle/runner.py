"""Sweep runner: graph x size x repeat x policy cells, estimators, truths, summaries."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

import pandas as pd

from nettmle.config import ExperimentSpec, PolicySpec
from nettmle.design import get_scenario
from nettmle.evaluation import improvement, improvement_overall, summarize
from nettmle.graph import TemporalNetwork, generate_power_law_clustered, generate_uniform
from nettmle.panel import Panel
from nettmle.policy import sample_policy_copies
from nettmle.results import (
    IMPROVEMENT_FILE,
    IMPROVEMENT_OVERALL_FILE,
    RUNS_FILE,
    SUMMARY_FILE,
    TRUTH_FILE,
    completed_run_ids,
    completed_truth_ids,
    load_runs,
    load_truths,
    record_run,
    record_truth,
    write_table,
)
from nettmle.seeding import derive_seed
from nettmle.simulator import counterfactual_truth, run_sir
from nettmle.tmle import run_estimator

logger = logging.getLogger(__name__)

BENCHMARK_KINDS = ("glm", "l2")
DEEP_KINDS = ("deep", "deep_noda")


def model_label(kind: str, reception_field: int | None = None) -> str:
    """Run-row model name: ``glm``, ``l2``, or ``deep@T9`` style for deep kinds."""
    if kind in DEEP_KINDS:
        return f"{kind}@T{reception_field}"
    return kind


def run_id(graph: str, n: int, scenario: str, policy: PolicySpec, model: str, rep: int) -> str:
    return f"{graph}-n{n}-{scenario}-{policy.label}-{model}-k{rep}"


def truth_id(graph: str, n: int, policy: PolicySpec, rep: int) -> str:
    return f"{graph}-n{n}-{policy.label}-k{rep}"


@dataclass(frozen=True)
class EstimatorJob:
    """One estimator run inside a repeat task."""

    run_id: str
    scenario: str
    kind: str
    reception_field: int | None
    model: str


@dataclass(frozen=True)
class RepeatTask:
    """Everything one worker does for a (graph, n, repeat, policy) cell.

    The graph and observed panel are rebuilt from derived seeds inside the
    worker, so a task carries no arrays and runs identically on any worker.
    """

    graph: str
    n: int
    rep: int
    policy: PolicySpec
    jobs: tuple[EstimatorJob, ...] = ()
    truth_id: str | None = None


@dataclass
class TaskResult:
    truth_row: dict[str, Any] | None = None
    run_rows: list[dict[str, Any]] = field(default_factory=list)


@dataclass
class SweepOutcome:
    """What a sweep wrote, and whether failures stayed within tolerance."""

    runs_written: int
    truths_written: int
    failed_runs: int
    total_runs: int
    summary_path: Path | None
    improvement_path: Path | None = None

    @property
    def failure_rate(self) -> float:
        return self.failed_runs / self.total_runs if self.total_runs else 0.0

    def exit_code(self, tolerance: float) -> int:
        return 1 if self.failure_rate > tolerance else 0


# ── Per-repeat data ───────────────────────────────────────────


def build_network(spec: ExperimentSpec, graph: str, n: int, rep: int) -> TemporalNetwork:
    """Contact network for one repeat, from the derived graph seed."""
    seed = derive_seed(spec.master_seed, "graph", graph, n, rep)
    cfg = spec.graph
    if graph == "uniform":
        return generate_uniform(n, cfg.d_min, cfg.d_max, seed=seed, max_retries=cfg.max_retries)
    if graph == "powerlaw":
        return generate_power_law_clustered(
            n,
            n_subgraphs=cfg.n_subgraphs,
            powerlaw_exponent=cfg.powerlaw_exponent,
            inter_edge_prob=cfg.inter_edge_prob,
            seed=seed,
            attachment_edges=cfg.attachment_edges,
            triangle_prob=cfg.triangle_prob,
        )
    raise ValueError(f"unknown graph kind {graph!r}")


def observe(spec: ExperimentSpec, graph: str, n: int, rep: int) -> tuple[TemporalNetwork, Panel, TemporalNetwork]:
    """Base network, observational panel, and realized snapshots for one repeat."""
    network = build_network(spec, graph, n, rep)
    seed = derive_seed(spec.master_seed, "observed", graph, n, rep)
    panel, realized = run_sir(network, PolicySpec.observational(), spec.sim, seed=seed)
    return network, panel, realized


def _cell_fields(task: RepeatTask) -> dict[str, Any]:
    policy = task.policy
    return {
        "graph": task.graph,
        "n": task.n,
        "policy": policy.label,
        "p_omega": policy.p_omega,
        "budget": policy.budget_fraction,
        "priority": policy.priority,
        "rep": task.rep,
    }


def _failed_row(task: RepeatTask, job: EstimatorJob, exc: BaseException) -> dict[str, Any]:
    logger.warning("run %s failed: %s", job.run_id, exc)
    message = f"failed: {type(exc).__name__}: {exc}".replace("\n", " ")
    return {
        **_cell_fields(task),
        "run_id": job.run_id,
        "scenario": job.scenario,
        "model": job.model,
        "notes": message,
    }


def execute_task(spec: ExperimentSpec, task: RepeatTask) -> TaskResult:
    """Run one repeat task end-to-end; per-run failures become rows with notes.

    The counterfactual truth is computed here and written to the truth store
    only. It never reaches the estimators.
    """
    result = TaskResult()
    master = spec.master_seed
    try:
        network, observed, realized = observe(spec, task.graph, task.n, task.rep)
    except Exception as exc:
        result.run_rows = [_failed_row(task, job, exc) for job in task.jobs]
        return result

    if task.truth_id is not None:
        try:
            psi = counterfactual_truth(
                network,
                task.policy,
                spec.sim,
                n_reps=spec.truth_reps,
                seed=derive_seed(master, "truth", task.graph, task.n, task.policy.label, task.rep),
            )
            result.truth_row = {
                **_cell_fields(task),
                "truth_id": task.truth_id,
                "psi_truth": psi,
                "n_reps": spec.truth_reps,
            }
        except Exception as exc:
            logger.warning("truth %s failed: %s", task.truth_id, exc)

    if not task.jobs:
        return result

    try:
        sampled = sample_policy_copies(
            observed,
            realized,
            task.policy,
            spec.estimator.m_copies,
            derive_seed(master, "copies", task.graph, task.n, task.policy.label, task.rep),
            spec.sim,
            spec.estimator.max_sampled_records,
        )
    except Exception as exc:
        result.run_rows = [_failed_row(task, job, exc) for job in task.jobs]
        return result

    for job in task.jobs:
        try:
            report = run_estimator(
                observed,
                realized,
                task.policy,
                spec.estimator,
                get_scenario(job.scenario),
                kind=job.kind,
                sim_config=spec.sim,
                seed=derive_seed(master, job.run_id),
                reception_field=job.reception_field,
                sampled=sampled,
            )
        except Exception as exc:
            result.run_rows.append(_failed_row(task, job, exc))
            continue
        result.run_rows.append(
            {
                **_cell_fields(task),
                "run_id": job.run_id,
                "scenario": job.scenario,
                "model": job.model,
                "psi_hat": report.psi_hat,
                "epsilon": report.epsilon,
                "sigma_d2": report.sigma_d2,
                "sigma_l2": report.sigma_l2,
                "lci_d": report.ci_direct[0],
                "uci_d": report.ci_direct[1],
                "lci_l": report.ci_latent[0],
                "uci_l": report.ci_latent[1],
                "m_copies": report.m_copies,
                "notes": "; ".join(report.notes),
            }
        )
    return result


def _execute(args: tuple[ExperimentSpec, RepeatTask]) -> TaskResult:
    return execute_task(*args)


# ── Sweep planning ────────────────────────────────────────────


def policies(spec: ExperimentSpec) -> list[PolicySpec]:
    return [
        PolicySpec(p_omega=p, budget_fraction=budget, priority=priority)
        for budget, priority in spec.policy_cells()
        for p in spec.p_omega_grid
    ]


def model_variants(spec: ExperimentSpec) -> list[tuple[str, int | None]]:
    """(kind, reception field) pairs; deep kinds expand over ``reception_fields``."""
    variants: list[tuple[str, int | None]] = []
    for kind in spec.models:
        if kind in DEEP_KINDS:
            variants.extend((kind, t_r) for t_r in spec.reception_fields)
        else:
            variants.append((kind, None))
    return variants


def plan_tasks(
    spec: ExperimentSpec,
    done_runs: set[str] | None = None,
    done_truths: set[str] | None = None,
    with_estimators: bool = True,
) -> list[RepeatTask]:
    """All repeat tasks still needing work, in a fixed order."""
    done_runs = done_runs or set()
    done_truths = done_truths or set()
    variants = model_variants(spec) if with_estimators else []
    tasks = []
    for graph in spec.graph_kinds:
        for n in spec.sizes:
            for rep in range(spec.repeats_for(graph, n)):
                for policy in policies(spec):
                    jobs = []
                    for scenario in spec.scenarios:
                        for kind, t_r in variants:
                            label = model_label(kind, t_r)
                            rid = run_id(graph, n, scenario, policy, label, rep)
                            if rid not in done_runs:
                                jobs.append(EstimatorJob(rid, scenario, kind, t_r, label))
                    tid = truth_id(graph, n, policy, rep)
                    pending_truth = tid if tid not in done_truths else None
                    if jobs or pending_truth:
                        tasks.append(RepeatTask(graph, n, rep, policy, tuple(jobs), pending_truth))
    return tasks


def _results(spec: ExperimentSpec, tasks: list[RepeatTask], jobs: int) -> Iterator[TaskResult]:
    if jobs <= 1:
        for task in tasks:
            yield execute_task(spec, task)
        return
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        yield from pool.map(_execute, [(spec, task) for task in tasks])


def _write_results(results: Iterable[TaskResult], runs_path: Path, truth_path: Path, total: int) -> tuple[int, int]:
    """Single writer: rows land in task order whatever the worker count."""
    runs = truths = 0
    for index, result in enumerate(results, start=1):
        if result.truth_row is not None:
            record_truth(result.truth_row, truth_path)
            truths += 1
        for row in result.run_rows:
            record_run(row, runs_path)
            runs += 1
        logger.info("task %d/%d done (%d run rows)", index, total, len(result.run_rows))
    return runs, truths


def _prepare(spec: ExperimentSpec, resume: bool) -> tuple[Path, Path, Path]:
    out = Path(spec.output_dir)
    runs_path, truth_path = out / RUNS_FILE, out / TRUTH_FILE
    if not resume and runs_path.exists():
        raise FileExistsError(f"{out} already holds results; pass --resume or choose another output_dir")
    out.mkdir(parents=True, exist_ok=True)
    return out, runs_path, truth_path


# ── Entry points ──────────────────────────────────────────────


def rebuild_summary(out_dir: Path) -> tuple[Path, Path | None]:
    """Summary (and improvement tables) from the run and truth CSVs alone.

    The per-cell improvement table is also averaged over scenarios and p_omega
    into ``improvement_overall.csv``.
    """
    summary = summarize(load_runs(out_dir / RUNS_FILE), load_truths(out_dir / TRUTH_FILE))
    summary_path = write_table(summary, out_dir / SUMMARY_FILE)
    logger.info("summary rebuilt: %d cells -> %s", len(summary), summary_path)

    models = set(summary["model"]) if not summary.empty else set()
    baselines = [m for m in BENCHMARK_KINDS if m in models]
    candidates = sorted(m for m in models if m.split("@")[0] in DEEP_KINDS)
    if not baselines or not candidates:
        return summary_path, None
    tables = [improvement(summary, baselines[0], c) for c in candidates]
    table = pd.concat(tables, ignore_index=True)
    improvement_path = write_table(table, out_dir / IMPROVEMENT_FILE)
    write_table(improvement_overall(table), out_dir / IMPROVEMENT_OVERALL_FILE)
    return summary_path, improvement_path


def run_experiment(spec: ExperimentSpec, jobs: int = 1, resume: bool = False) -> SweepOutcome:
    """Run a full sweep and write run, truth, summary, and improvement CSVs.

    Args:
        spec: Validated sweep configuration.
        jobs: Worker processes; 1 runs in-process.
        resume: Skip run and truth ids already present in the output CSVs.

    Returns:
        SweepOutcome; ``exit_code(spec.failure_tolerance)`` is the process status.
    """
    out, runs_path, truth_path = _prepare(spec, resume)
    tasks = plan_tasks(spec, completed_run_ids(runs_path), completed_truth_ids(truth_path))
    logger.info("sweep: %d pending tasks, %d estimator runs", len(tasks), sum(len(t.jobs) for t in tasks))

    written, truths = _write_results(_results(spec, tasks, jobs), runs_path, truth_path, len(tasks))
    summary_path, improvement_path = rebuild_summary(out)

    runs = load_runs(runs_path)
    failed = int(runs["psi_hat"].isna().sum())
    outcome = SweepOutcome(written, truths, failed, len(runs), summary_path, improvement_path)
    if outcome.failed_runs:
        logger.warning("%d of %d runs failed (%.1f%%)", failed, len(runs), 100 * outcome.failure_rate)
    return outcome


def run_truths(spec: ExperimentSpec, jobs: int = 1, resume: bool = False) -> SweepOutcome:
    """Truth-only mode: fill ``truth.csv`` without running any estimator."""
    out = Path(spec.output_dir)
    truth_path = out / TRUTH_FILE
    if not resume and truth_path.exists():
        raise FileExistsError(f"{truth_path} exists; pass --resume or choose another output_dir")
    out.mkdir(parents=True, exist_ok=True)
    tasks = plan_tasks(spec, done_truths=completed_truth_ids(truth_path), with_estimators=False)
    logger.info("truth sweep: %d pending truths", len(tasks))
    _, truths = _write_results(_results(spec, tasks, jobs), out / RUNS_FILE, truth_path, len(tasks))
    return SweepOutcome(0, truths, 0, 0, None)
