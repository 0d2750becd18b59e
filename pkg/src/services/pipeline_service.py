from __future__ import annotations

import contextvars
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence, TypeVar

from adapters.csv_codec import (
    convergence_to_csv,
    events_to_csv,
    gestures_to_csv,
    parse_au_csv,
    parse_stimulus_schedule,
    serialize_schedule_csv,
    serialize_trace_csv,
)
from adapters.filesystem_store import TRACES_DIR, DatasetStore
from config import RunConfig, render_config_file
from domain.errors import (
    AppError,
    ExcludedSubject,
    MissingSchedule,
    NoIncludedSubjects,
    NoParseableSubjects,
)
from domain.models import (
    AUEvent,
    Clustering,
    FacialGesture,
    MetricsReport,
    Mode,
    StimulusAlignment,
    StimulusSchedule,
    SubjectResult,
    TraceWarning,
    ValidatedTrace,
)
from logging_utils import log_error, log_info, log_warning, subject_context
from ports.dataset_repo import DatasetRepositoryPort, ReportSinkPort
from services.clustering import affinity_propagation, build_temporal_similarity
from services.event_detection import detect_events
from services.gestures import assemble_gestures, featurize_all, normalize_cohort
from services.ingest import validate_trace
from services.prediction import SubjectGestures, aggregate_metrics, align_stimuli, evaluate_subject
from services.synthesis import CohortConfig, SyntheticCohort, generate_cohort

EXIT_OK = 0
EXIT_FATAL = 1
EXIT_PARTIAL = 2

# Noise-free synthetic pulses of one gesture stay above -1 s^2 of each other; across gestures, below -4.8 s^2.
SYNTHETIC_RUN_DEFAULTS = {"preference": -1.0}

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class SubjectFailure:
    subject_id: str
    stage: str
    error: str
    message: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "stage": self.stage,
            "error": self.error,
            "message": self.message,
        }


@dataclass(frozen=True)
class SubjectAnalysis:
    subject_id: str
    validated: ValidatedTrace
    warnings: tuple[TraceWarning, ...]
    events: tuple[AUEvent, ...] = ()
    clustering: Clustering | None = None
    gestures: tuple[FacialGesture, ...] = ()

    def ingest_summary(self) -> dict[str, Any]:
        trace = self.validated.trace
        return {
            "subject_id": self.subject_id,
            "frames": trace.n_frames,
            "au_ids": list(trace.au_ids),
            "valid_fraction": self.validated.valid_fraction,
            "warnings": [warning.to_dict() for warning in self.warnings],
        }


@dataclass(frozen=True)
class ModeOutcome:
    mode: Mode
    results: tuple[SubjectResult, ...]
    metrics: MetricsReport | None


@dataclass(frozen=True)
class AnalysisBatch:
    analyses: tuple[SubjectAnalysis, ...]
    failures: tuple[SubjectFailure, ...]

    @property
    def subjects_total(self) -> int:
        return len(self.analyses) + len(self.failures)


@dataclass(frozen=True)
class EvaluationRun:
    config_echo: dict[str, Any]
    outcomes: tuple[ModeOutcome, ...]
    failures: tuple[SubjectFailure, ...]
    subjects_total: int
    alignments: tuple[StimulusAlignment, ...] = field(default_factory=tuple)

    @property
    def exit_code(self) -> int:
        if self.failures:
            return EXIT_PARTIAL
        if any(result.excluded for outcome in self.outcomes for result in outcome.results):
            return EXIT_PARTIAL
        return EXIT_OK


def _failure(subject_id: str, stage: str, exc: Exception) -> SubjectFailure:
    code = getattr(exc, "code", type(exc).__name__)
    log_error("subject_failed", subject_id=subject_id, stage=stage, error=code, detail=str(exc))
    return SubjectFailure(subject_id=subject_id, stage=stage, error=str(code), message=str(exc))


class PipelineService:
    """ingest -> detect -> similarity -> cluster -> assemble -> featurize -> align -> evaluate -> aggregate.

    Subjects are processed independently on a thread pool; every reduction
    runs over subject ids in sorted order, so the worker count never changes
    a result.
    """

    def __init__(
        self,
        store: DatasetRepositoryPort,
        config: RunConfig,
        reports: ReportSinkPort | None = None,
    ) -> None:
        self._store = store
        self._config = config
        self._reports = reports

    @property
    def config(self) -> RunConfig:
        return self._config

    def _map(self, func: Callable[[T], R], items: Sequence[T]) -> list[R]:
        if self._config.threads > 1 and len(items) > 1:
            # Workers inherit the caller's run id and other context variables.
            context = contextvars.copy_context()
            with ThreadPoolExecutor(max_workers=self._config.threads) as pool:
                return list(pool.map(lambda item: context.copy().run(func, item), items))
        return [func(item) for item in items]

    # Per-subject stages

    def _ingest(self, subject_id: str) -> SubjectAnalysis:
        raw = self._store.read_trace(subject_id)
        trace = parse_au_csv(raw, subject_id=subject_id, confidence_floor=self._config.confidence_floor)
        validated, warnings = validate_trace(trace, min_valid_fraction=self._config.min_valid_fraction)
        return SubjectAnalysis(subject_id=subject_id, validated=validated, warnings=tuple(warnings))

    def _cluster(self, analysis: SubjectAnalysis) -> SubjectAnalysis:
        config = self._config
        events = detect_events(analysis.validated, config.detection_params)
        if not events:
            log_warning("no_events_detected", subject_id=analysis.subject_id)
            return SubjectAnalysis(analysis.subject_id, analysis.validated, analysis.warnings)
        similarity = build_temporal_similarity(events, config.preference)
        clustering = affinity_propagation(
            similarity,
            config.damping,
            config.max_iter,
            config.convergence_iter,
            refine=config.refine_exemplars,
            record_history=True,
        )
        gestures = assemble_gestures(events, clustering, analysis.subject_id)
        log_info(
            "subject_clustered",
            subject_id=analysis.subject_id,
            events=len(events),
            gestures=len(gestures),
            converged=clustering.converged,
        )
        return SubjectAnalysis(
            subject_id=analysis.subject_id,
            validated=analysis.validated,
            warnings=analysis.warnings,
            events=tuple(events),
            clustering=clustering,
            gestures=tuple(gestures),
        )

    def _run_subject(self, subject_id: str, *, cluster: bool) -> SubjectAnalysis | SubjectFailure:
        with subject_context(subject_id):
            stage = "ingest"
            try:
                analysis = self._ingest(subject_id)
                if cluster:
                    stage = "cluster"
                    analysis = self._cluster(analysis)
                return analysis
            except (AppError, ValueError, OSError) as exc:
                return _failure(subject_id, stage, exc)

    def analyze(self, *, cluster: bool = True) -> AnalysisBatch:
        """Run ingest (and optionally detection + clustering) for every subject in the store."""
        subject_ids = self._store.list_subjects()
        outcomes = self._map(lambda sid: self._run_subject(sid, cluster=cluster), subject_ids)
        analyses = tuple(o for o in outcomes if isinstance(o, SubjectAnalysis))
        failures = tuple(o for o in outcomes if isinstance(o, SubjectFailure))
        log_info("subjects_analyzed", subjects=len(subject_ids), ok=len(analyses), failed=len(failures))
        return AnalysisBatch(analyses=analyses, failures=failures)

    def ingest_check(self) -> AnalysisBatch:
        return self.analyze(cluster=False)

    # Evaluation

    def load_schedules(self, path: Path | None = None) -> dict[str, StimulusSchedule]:
        target = path or self._config.schedule_path or self._store.schedule_path
        return parse_stimulus_schedule(Path(target).read_bytes())

    def _featurize(self, gestures: Sequence[FacialGesture], mode: Mode, pooled: Sequence[FacialGesture]):
        if not gestures:
            return ()
        norm = normalize_cohort(gestures if mode is Mode.SD else pooled, mode)
        return tuple(featurize_all(gestures, norm))

    def _evaluate_mode(
        self,
        mode: Mode,
        analyses: Sequence[SubjectAnalysis],
        alignments: Mapping[str, StimulusAlignment],
    ) -> ModeOutcome:
        config = self._config
        pooled = [g for analysis in analyses for g in analysis.gestures]
        subjects = [
            SubjectGestures(
                subject_id=analysis.subject_id,
                gestures=self._featurize(analysis.gestures, mode, pooled),
                alignment=alignments[analysis.subject_id],
            )
            for analysis in analyses
        ]
        pool = []
        if mode is Mode.SI:
            for subject in subjects:
                if not subject.alignment.excluded:
                    pool.extend(subject.training_vectors())

        def run(subject: SubjectGestures) -> SubjectResult:
            with subject_context(subject.subject_id):
                try:
                    return evaluate_subject(subject, mode, pool, si_strategy=config.si_strategy)
                except ExcludedSubject as exc:
                    log_warning("subject_excluded", subject_id=subject.subject_id, mode=mode.value, reason=exc.reason)
                    return SubjectResult.excluded_result(subject.subject_id, mode, exc.reason)

        results = tuple(self._map(run, subjects))
        try:
            metrics: MetricsReport | None = aggregate_metrics(results, mode=mode, topk=config.topk_list)
        except NoIncludedSubjects:
            log_warning("no_included_subjects", mode=mode.value)
            metrics = None
        return ModeOutcome(mode=mode, results=results, metrics=metrics)

    def evaluate(self, schedules: Mapping[str, StimulusSchedule] | None = None) -> EvaluationRun:
        config = self._config
        if schedules is None:
            schedules = self.load_schedules()
        batch = self.analyze(cluster=True)
        if not batch.analyses:
            raise NoParseableSubjects(
                f"none of the {batch.subjects_total} trace(s) could be parsed"
                if batch.subjects_total
                else "no trace files found"
            )

        failures = list(batch.failures)
        scheduled: list[SubjectAnalysis] = []
        for analysis in batch.analyses:
            if analysis.subject_id in schedules:
                scheduled.append(analysis)
            else:
                failures.append(
                    _failure(analysis.subject_id, "align", MissingSchedule("no stimulus schedule for subject"))
                )
        unused = sorted(set(schedules) - {a.subject_id for a in batch.analyses})
        if unused:
            log_warning("schedule_without_trace", subjects=",".join(unused))

        alignments = {
            analysis.subject_id: align_stimuli(
                analysis.gestures,
                schedules[analysis.subject_id],
                config.response_window,
                target_stimulus=config.target_stimulus,
            )
            for analysis in scheduled
        }
        outcomes = tuple(self._evaluate_mode(mode, scheduled, alignments) for mode in config.modes)
        failures.sort(key=lambda failure: failure.subject_id)
        run = EvaluationRun(
            config_echo=config.echo(),
            outcomes=outcomes,
            failures=tuple(failures),
            subjects_total=batch.subjects_total,
            alignments=tuple(alignments[sid] for sid in sorted(alignments)),
        )
        log_info(
            "evaluation_finished",
            subjects=run.subjects_total,
            failed=len(run.failures),
            modes=",".join(outcome.mode.value for outcome in outcomes),
            exit_code=run.exit_code,
        )
        return run

    # Outputs

    def _sink(self) -> ReportSinkPort:
        if self._reports is None:
            raise RuntimeError("PipelineService was built without a report sink")
        return self._reports

    def dump_stages(
        self,
        analyses: Iterable[SubjectAnalysis],
        output_dir: Path,
        *,
        gestures: bool = True,
        convergence: bool = False,
    ) -> list[Path]:
        """events.csv, plus SD-featurized gestures.csv and per-iteration convergence.csv on request."""
        analyses = list(analyses)
        sink = self._sink()
        written = [
            sink.write_bytes(
                output_dir / "events.csv",
                events_to_csv((a.subject_id, event) for a in analyses for event in a.events),
            )
        ]
        if gestures:
            featurized = [g for a in analyses for g in self._featurize(a.gestures, Mode.SD, a.gestures)]
            written.append(sink.write_bytes(output_dir / "gestures.csv", gestures_to_csv(featurized)))
        if convergence:
            rows = [(a.subject_id, a.clustering) for a in analyses if a.clustering is not None]
            written.append(sink.write_bytes(output_dir / "convergence.csv", convergence_to_csv(rows)))
        return written


def write_cohort(cohort: SyntheticCohort, out_dir: Path, sink: ReportSinkPort) -> list[Path]:
    """Lay a cohort out as `traces/<subject>.csv`, `schedule.csv`, `ground_truth.json` and `run.conf`."""
    store = DatasetStore(out_dir)
    written = [
        sink.write_bytes(out_dir / TRACES_DIR / f"{subject.profile.subject_id}.csv", serialize_trace_csv(subject.trace))
        for subject in cohort.subjects
    ]
    written.append(sink.write_bytes(store.schedule_path, serialize_schedule_csv(cohort.schedules())))
    written.append(sink.write_json(store.ground_truth_path, cohort.ground_truth_dict()))
    written.append(
        sink.write_bytes(
            store.run_config_path,
            render_config_file(SYNTHETIC_RUN_DEFAULTS, header="evaluate defaults for this synthetic cohort"),
        )
    )
    log_info("cohort_written", out_dir=str(out_dir), subjects=len(cohort.subjects))
    return written


def synthesize(
    config: CohortConfig,
    master_seed: int,
    out_dir: Path,
    sink: ReportSinkPort,
    *,
    threads: int = 1,
) -> SyntheticCohort:
    cohort = generate_cohort(config, master_seed, threads=threads)
    write_cohort(cohort, out_dir, sink)
    return cohort
