"""gesture-forge command line.

Subcommands
-----------
ingest-check  parse and validate every trace, report warnings
detect        write events.csv for every trace
cluster       write events.csv, gestures.csv and optionally convergence.csv
evaluate      full pipeline, JSON report plus CSV summary
synth         write a seeded synthetic cohort

Exit codes: 0 success, 2 partial (some subject excluded or failed), 1 fatal.
"""

from __future__ import annotations

import argparse
import json
import sys
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Sequence

from adapters.filesystem_store import DatasetStore
from adapters.report_json_repo import ReportRepository, dumps_report
from config import THREADS_ENV, AppConfig, RunConfig
from domain.errors import AppError, InvalidConfig
from logging_utils import configure_console_logging, configure_file_logging, log_error, log_info, run_context
from services.pipeline_service import EXIT_FATAL, EXIT_OK, EXIT_PARTIAL, PipelineService, synthesize
from services.reporting import emit_report
from services.synthesis import DEFAULT_DISTRACTORS, DEFAULT_FPS, DEFAULT_LENGTH_S, CohortConfig

Handler = Callable[[argparse.Namespace], int]

# argparse dest -> RunConfig field, for every flag that may override the config file.
_OVERRIDES = {
    "traces": "traces_dir",
    "schedule": "schedule_path",
    "out": "output_dir",
    "report_out": "report_out",
    "summary_out": "summary_out",
    "confidence_floor": "confidence_floor",
    "min_valid_fraction": "min_valid_fraction",
    "activation_threshold": "activation_threshold",
    "min_duration": "min_duration_frames",
    "smoothing_window": "smoothing_window",
    "damping": "damping",
    "max_iter": "max_iter",
    "convergence_iter": "convergence_iter",
    "preference": "preference",
    "refine_exemplars": "refine_exemplars",
    "mode": "mode",
    "window": "response_window",
    "target_stimulus": "target_stimulus",
    "si_strategy": "si_strategy",
    "topk_list": "topk_list",
    "seed": "seed",
    "threads": "threads",
}


def handle_cli_errors(func: Handler) -> Handler:
    @wraps(func)
    def wrapper(args: argparse.Namespace) -> int:
        with run_context():
            try:
                return func(args)
            except AppError as exc:
                log_error("command_failed", command=args.command, error=exc.code, detail=str(exc))
                print(f"ERR_{exc.code}: {exc}", file=sys.stderr)
                return EXIT_FATAL
            except OSError as exc:
                log_error("command_failed", command=args.command, error="IO", detail=str(exc))
                print(f"ERR_IO: {exc}", file=sys.stderr)
                return EXIT_FATAL

    return wrapper


def _range(raw: str) -> tuple[float, float]:
    """`0.1` or `0.05:0.2`."""
    try:
        if ":" in raw:
            lo, hi = (float(part) for part in raw.split(":", 1))
        else:
            lo = hi = float(raw)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected a number or lo:hi range, got {raw!r}") from exc
    return lo, hi


def _cohort_defaults(traces: str | None) -> Path | None:
    """A cohort's own run.conf, used when no --config is given."""
    if not traces:
        return None
    path = DatasetStore(traces).run_config_path
    if not path.is_file():
        return None
    log_info("cohort_defaults_loaded", path=str(path))
    return path


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {field: getattr(args, dest) for dest, field in _OVERRIDES.items() if hasattr(args, dest)}
    config_file = Path(args.config) if getattr(args, "config", None) else None
    if config_file is None:
        config_file = _cohort_defaults(getattr(args, "traces", None))
    return RunConfig.load(overrides, config_file, getattr(args, "env", None))


def _write_or_print(repo: ReportRepository, path: Path | None, data: bytes) -> None:
    if path is None:
        sys.stdout.write(data.decode("utf-8"))
        return
    repo.write_bytes(path, data)
    log_info("report_written", path=str(path), bytes=len(data))


def _service(config: RunConfig, repo: ReportRepository) -> PipelineService:
    if config.traces_dir is None:
        raise InvalidConfig("--traces is required (or traces_dir in the config file)")
    return PipelineService(DatasetStore(config.traces_dir), config, repo)


@handle_cli_errors
def cmd_ingest_check(args: argparse.Namespace) -> int:
    config = _run_config(args).validate(require_traces=True)
    repo = ReportRepository()
    service = _service(config, repo)
    batch = service.ingest_check()
    payload: dict[str, Any] = {
        "subjects": [analysis.ingest_summary() for analysis in batch.analyses],
        "failures": [failure.to_dict() for failure in batch.failures],
    }
    if config.schedule_path is not None:
        schedules = service.load_schedules(config.schedule_path)
        payload["schedule"] = [schedules[sid].to_dict() for sid in sorted(schedules)]
    _write_or_print(repo, config.report_out, dumps_report(payload))
    return EXIT_PARTIAL if batch.failures else EXIT_OK


def _stage_dump(args: argparse.Namespace, *, gestures: bool) -> int:
    config = _run_config(args).validate(require_traces=True)
    if config.output_dir is None:
        raise InvalidConfig("--out is required")
    repo = ReportRepository()
    service = _service(config, repo)
    batch = service.analyze(cluster=True)
    written = service.dump_stages(
        batch.analyses,
        config.output_dir,
        gestures=gestures,
        convergence=gestures and bool(getattr(args, "dump_convergence", False)),
    )
    for path in written:
        print(path)
    return EXIT_PARTIAL if batch.failures else EXIT_OK


@handle_cli_errors
def cmd_detect(args: argparse.Namespace) -> int:
    return _stage_dump(args, gestures=False)


@handle_cli_errors
def cmd_cluster(args: argparse.Namespace) -> int:
    return _stage_dump(args, gestures=True)


@handle_cli_errors
def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _run_config(args).validate(require_traces=True)
    repo = ReportRepository()
    service = _service(config, repo)
    schedule_path = config.schedule_path or DatasetStore(config.traces_dir).schedule_path  # type: ignore[arg-type]
    if not schedule_path.is_file():
        raise InvalidConfig(f"schedule file not found: {schedule_path}")

    run = service.evaluate(service.load_schedules(schedule_path))
    report_out = config.report_out
    if report_out is None and config.output_dir is not None:
        report_out = config.output_dir / "report.json"
    _write_or_print(repo, report_out, emit_report(run, "json"))

    summary = emit_report(run, "csv")
    if config.summary_out is not None:
        repo.write_bytes(config.summary_out, summary)
    if report_out is not None:
        sys.stdout.write(summary.decode("utf-8"))
    return run.exit_code


@handle_cli_errors
def cmd_synth(args: argparse.Namespace) -> int:
    try:
        cohort_config = CohortConfig(
            subjects=args.subjects,
            fps=args.fps,
            length_s=args.length,
            stimuli=args.stimuli,
            time_jitter=args.time_jitter,
            intensity_jitter=args.intensity_jitter,
            distractor_count=args.distractors,
            shared_template=args.shared_template,
            avoid_response_windows=not args.allow_overlap,
            flinch_count=args.flinches,
        )
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from exc
    threads = _run_config(args).threads
    out_dir = Path(args.out)
    cohort = synthesize(cohort_config, args.seed, out_dir, ReportRepository(), threads=threads)
    print(json.dumps({"out": str(out_dir), "subjects": len(cohort.subjects), "seed": args.seed}))
    return EXIT_OK


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file (default: <traces>/run.conf); flags override it")
    parser.add_argument("--threads", type=int, help=f"worker threads (env {THREADS_ENV})")


def _add_ingest(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--traces", help="directory of per-subject AU CSVs, or a cohort directory")
    parser.add_argument("--confidence-floor", type=float, help="frames below this confidence are invalid")
    parser.add_argument("--min-valid-fraction", type=float, help="reject traces with fewer valid frames")


def _add_detection(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--activation-threshold", type=float)
    parser.add_argument("--min-duration", type=int, help="minimum event length in frames")
    parser.add_argument("--smoothing-window", type=int, help="odd moving-average width in frames")


def _add_clustering(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--damping", type=float)
    parser.add_argument("--max-iter", type=int)
    parser.add_argument("--convergence-iter", type=int)
    parser.add_argument(
        "--preference",
        type=float,
        help="exemplar preference in s^2 (default: the cohort run.conf, else the median similarity)",
    )
    parser.add_argument("--no-refine", dest="refine_exemplars", action="store_const", const=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gesture-forge",
        description="Facial gesture detection and stimulus-response prediction from AU traces.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog=(
            "Examples:\n"
            "  gesture-forge synth --subjects 20 --seed 42 --out cohort/\n"
            "  gesture-forge evaluate --traces cohort/ --report-out report.json\n"
            "\nA cohort directory may carry run.conf (synth writes one); --config replaces it.\n"
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    ingest = subparsers.add_parser("ingest-check", help="parse and validate traces")
    _add_common(ingest)
    _add_ingest(ingest)
    ingest.add_argument("--schedule", help="also validate this stimulus schedule")
    ingest.add_argument("--report-out", help="write the JSON report here instead of stdout")
    ingest.set_defaults(handler=cmd_ingest_check)

    detect = subparsers.add_parser("detect", help="segment AU events")
    _add_common(detect)
    _add_ingest(detect)
    _add_detection(detect)
    detect.add_argument("--out", help="output directory")
    detect.set_defaults(handler=cmd_detect)

    cluster = subparsers.add_parser("cluster", help="cluster events into facial gestures")
    _add_common(cluster)
    _add_ingest(cluster)
    _add_detection(cluster)
    _add_clustering(cluster)
    cluster.add_argument("--out", help="output directory")
    cluster.add_argument("--dump-convergence", action="store_true", help="also write convergence.csv")
    cluster.set_defaults(handler=cmd_cluster)

    evaluate = subparsers.add_parser("evaluate", help="run the full pipeline and score predictions")
    _add_common(evaluate)
    _add_ingest(evaluate)
    _add_detection(evaluate)
    _add_clustering(evaluate)
    evaluate.add_argument("--schedule", help="stimulus schedule CSV (default: <traces>/schedule.csv)")
    evaluate.add_argument("--mode", choices=["sd", "si", "both"])
    evaluate.add_argument("--window", type=float, help="response window after each stimulus, seconds")
    evaluate.add_argument("--target-stimulus", type=int, help="stimulus whose response is predicted")
    evaluate.add_argument("--si-strategy", choices=["pooled_mean", "nearest_set"])
    evaluate.add_argument("--topk-list", help="comma-separated k values, e.g. 2,10")
    evaluate.add_argument("--report-out", help="JSON report path (default: stdout)")
    evaluate.add_argument("--summary-out", help="CSV summary path")
    evaluate.add_argument("--out", help="output directory; report.json goes here without --report-out")
    evaluate.set_defaults(handler=cmd_evaluate)

    synth = subparsers.add_parser("synth", help="generate a synthetic cohort")
    _add_common(synth)
    synth.add_argument("--out", required=True, help="cohort directory")
    synth.add_argument("--subjects", type=int, default=20)
    synth.add_argument("--seed", type=int, default=42, help="master seed")
    synth.add_argument("--length", type=float, default=DEFAULT_LENGTH_S, help="trace length, seconds")
    synth.add_argument("--fps", type=float, default=DEFAULT_FPS)
    synth.add_argument("--stimuli", type=int, default=3)
    synth.add_argument("--distractors", type=int, default=DEFAULT_DISTRACTORS)
    synth.add_argument("--time-jitter", type=_range, default=(0.0, 0.0), help="sigma in s, or lo:hi")
    synth.add_argument("--intensity-jitter", type=_range, default=(0.0, 0.0), help="sigma, or lo:hi")
    synth.add_argument("--flinches", type=int, default=0, help="anticipatory template copies per subject")
    synth.add_argument("--allow-overlap", action="store_true", help="let distractors overlap responses")
    synth.add_argument("--shared-template", action="store_true", help="one response template for everyone")
    synth.set_defaults(handler=cmd_synth)
    return parser


def main(argv: Sequence[str] | None = None, env=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.env = env
    try:
        app_config = AppConfig.from_env(env)
    except InvalidConfig as exc:
        print(f"ERR_{exc.code}: {exc}", file=sys.stderr)
        return EXIT_FATAL
    configure_console_logging(app_config.log_level)
    if app_config.log_dir is not None:
        configure_file_logging(app_config.log_dir)
    return args.handler(args)


if __name__ == "__main__":
    sys.exit(main())
