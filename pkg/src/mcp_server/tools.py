from __future__ import annotations

from adapters.filesystem_store import DatasetStore
from config import RunConfig
from logging_utils import log_info
from services.pipeline_service import synthesize
from services.reporting import build_report, emit_report
from services.synthesis import CohortConfig

from .app import mcp
from .deps import get_services
from .error_handling import handle_mcp_errors


def _run_config(traces: str | None = None, **overrides) -> RunConfig:
    """Tool arguments over the cohort run.conf (when `traces` has one) over defaults."""
    services = get_services()
    config_file = None
    if traces is not None:
        candidate = DatasetStore(services.resolve(traces)).run_config_path
        config_file = candidate if candidate.is_file() else None
    return RunConfig.load({**overrides, "threads": services.config.threads}, config_file).validate()


@handle_mcp_errors
def ingest_check(traces: str) -> dict:
    """Parse and validate every AU trace under `traces` (relative to the data directory)."""
    services = get_services()
    log_info("ingest_check", traces=traces)
    batch = services.pipeline(traces, _run_config(traces)).ingest_check()
    return {
        "subjects": [analysis.ingest_summary() for analysis in batch.analyses],
        "failures": [failure.to_dict() for failure in batch.failures],
    }


@handle_mcp_errors
def evaluate_cohort(
    traces: str,
    schedule: str | None = None,
    mode: str = "both",
    window: float = 2.0,
    preference: float | None = None,
    target_stimulus: int = 3,
    si_strategy: str = "pooled_mean",
    report_out: str | None = None,
) -> dict:
    services = get_services()
    config = _run_config(
        traces,
        mode=mode,
        response_window=window,
        preference=preference,
        target_stimulus=target_stimulus,
        si_strategy=si_strategy,
    )
    service = services.pipeline(traces, config)
    schedule_path = services.resolve(schedule) if schedule else None
    log_info("evaluate_cohort", traces=traces, mode=mode)
    run = service.evaluate(service.load_schedules(schedule_path))
    if report_out:
        services.reports.write_bytes(services.resolve(report_out), emit_report(run, "json"))
    report = build_report(run)
    report["exit_code"] = run.exit_code
    return report


@handle_mcp_errors
def synthesize_cohort(
    out: str,
    subjects: int = 20,
    seed: int = 42,
    distractors: int = 40,
    length: float = 300.0,
    time_jitter: float = 0.0,
    intensity_jitter: float = 0.0,
    flinches: int = 0,
) -> dict:
    services = get_services()
    try:
        cohort_config = CohortConfig(
            subjects=subjects,
            length_s=length,
            time_jitter=(time_jitter, time_jitter),
            intensity_jitter=(intensity_jitter, intensity_jitter),
            distractor_count=distractors,
            flinch_count=flinches,
        )
    except ValueError as exc:
        raise ValueError(f"ERR_INVALID_CONFIG: {exc}") from exc
    out_dir = services.resolve(out)
    log_info("synthesize_cohort", out=out, subjects=subjects, seed=seed)
    cohort = synthesize(cohort_config, seed, out_dir, services.reports, threads=services.config.threads)
    return {
        "out": out,
        "subjects": [subject.profile.subject_id for subject in cohort.subjects],
        "master_seed": seed,
    }


mcp.tool(ingest_check)
mcp.tool(evaluate_cohort)
mcp.tool(synthesize_cohort)
