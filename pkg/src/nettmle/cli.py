"""Command-line entry point: ``nettmle run | truth | series``.

Usage:
    nettmle run --config configs/smoke.yaml            # full sweep
    nettmle run --config configs/uniform_cc.yaml --jobs 4 --resume
    nettmle truth --config configs/uniform_cc.yaml           # counterfactual truths only
    nettmle series --summary results/summary.csv --metric bias
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from nettmle.config import ExperimentSpec, parse_config
from nettmle.evaluation import METRICS
from nettmle.results import SERIES_FACETS, emit_series
from nettmle.runner import run_experiment, run_truths

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def _load_spec(path: str) -> ExperimentSpec | None:
    try:
        return parse_config(path)
    except FileNotFoundError as exc:
        logger.error("%s", exc)
    except ValidationError as exc:
        logger.error("invalid config %s:\n%s", path, exc)
    return None


def _cmd_run(args: argparse.Namespace) -> int:
    spec = _load_spec(args.config)
    if spec is None:
        return 2
    try:
        outcome = run_experiment(spec, jobs=args.jobs, resume=args.resume)
    except FileExistsError as exc:
        logger.error("%s", exc)
        return 2
    logger.info(
        "wrote %d runs and %d truths; summary at %s",
        outcome.runs_written,
        outcome.truths_written,
        outcome.summary_path,
    )
    return outcome.exit_code(spec.failure_tolerance)


def _cmd_truth(args: argparse.Namespace) -> int:
    spec = _load_spec(args.config)
    if spec is None:
        return 2
    try:
        outcome = run_truths(spec, jobs=args.jobs, resume=args.resume)
    except FileExistsError as exc:
        logger.error("%s", exc)
        return 2
    logger.info("wrote %d truths to %s", outcome.truths_written, spec.output_dir)
    return 0


def _parse_where(items: list[str]) -> dict[str, str]:
    where = {}
    for item in items:
        key, sep, value = item.partition("=")
        if not sep or key not in SERIES_FACETS:
            raise ValueError(f"--where expects KEY=VALUE with KEY in {', '.join(SERIES_FACETS)}, got {item!r}")
        where[key] = value
    return where


def _cmd_series(args: argparse.Namespace) -> int:
    summary = Path(args.summary)
    if not summary.exists():
        logger.error("summary not found: %s", summary)
        return 2
    try:
        paths = emit_series(
            summary,
            args.metric,
            out_dir=Path(args.out) if args.out else None,
            where=_parse_where(args.where),
            html=args.html,
        )
    except ValueError as exc:
        logger.error("%s", exc)
        return 2
    for path in paths:
        print(path)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nettmle", description="Network TMLE quarantine-policy lab")
    parser.add_argument(
        "--log-level", default="INFO", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Root log level"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a sweep and write run, truth and summary CSVs")
    run.add_argument("--config", required=True, help="YAML sweep config")
    run.add_argument("--jobs", type=int, default=1, help="Worker processes (default: 1)")
    run.add_argument("--resume", action="store_true", help="Skip runs already in the output CSVs")
    run.set_defaults(func=_cmd_run)

    truth = sub.add_parser("truth", help="Compute counterfactual truths only")
    truth.add_argument("--config", required=True, help="YAML sweep config")
    truth.add_argument("--jobs", type=int, default=1, help="Worker processes (default: 1)")
    truth.add_argument("--resume", action="store_true", help="Skip truths already recorded")
    truth.set_defaults(func=_cmd_truth)

    series = sub.add_parser("series", help="Write plot-ready metric-vs-p_omega series")
    series.add_argument("--summary", required=True, help="Summary CSV from a sweep")
    series.add_argument("--metric", required=True, choices=METRICS)
    series.add_argument("--out", help="Output directory (default: series/ next to the summary)")
    series.add_argument("--where", action="append", default=[], metavar="KEY=VALUE", help="Facet filter")
    series.add_argument("--html", action="store_true", help="Also write a plotly chart per series")
    series.set_defaults(func=_cmd_series)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command in ("run", "truth") and args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 2
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
