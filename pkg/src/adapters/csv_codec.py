"""CSV codecs for OpenFace AU traces, stimulus schedules and stage dumps."""

from __future__ import annotations

import io
import re
from typing import BinaryIO, Iterable, Mapping

import numpy as np
import pandas as pd

from domain.errors import (
    DuplicateStimulusIndex,
    MalformedRow,
    MissingColumn,
    NonIncreasingTimes,
    NonMonotonicTimestamps,
)
from domain.models import (
    AUEvent,
    Clustering,
    FacialGesture,
    StimulusSchedule,
    SubjectTrace,
    feature_names,
)
from domain.types import canonical_au_order, is_known_au

_AU_INTENSITY_RE = re.compile(r"^(AU\d{2})_r$")
_SCHEDULE_COLUMNS = ("subject_id", "stimulus_index", "time_s")

ByteSource = bytes | bytearray | BinaryIO

EVENT_COLUMNS = [
    "subject_id",
    "au_id",
    "onset_s",
    "apex_s",
    "offset_s",
    "onset_i",
    "apex_i",
    "offset_i",
    "rise_rate",
    "fall_rate",
]


def _as_stream(source: ByteSource) -> BinaryIO:
    if isinstance(source, (bytes, bytearray)):
        return io.BytesIO(bytes(source))
    return source


def _read_table(source: ByteSource) -> pd.DataFrame:
    try:
        frame = pd.read_csv(
            _as_stream(source),
            dtype=str,
            skipinitialspace=True,
            keep_default_na=False,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError as exc:
        raise MissingColumn("file is empty; a header row is required") from exc
    except (pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise MalformedRow(str(exc)) from exc
    frame.columns = [str(column).strip() for column in frame.columns]
    return frame


def _numeric_column(frame: pd.DataFrame, column: str) -> np.ndarray:
    raw = frame[column].str.strip()
    try:
        values = raw.to_numpy(dtype=object).astype(float)
    except ValueError:
        values = pd.to_numeric(raw, errors="coerce").to_numpy(dtype=float)
    bad = ~np.isfinite(values)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        # +2: header is line 1
        raise MalformedRow(
            f"column {column!r}: cannot parse {frame[column].iloc[row]!r}",
            line=row + 2,
        )
    return values


def parse_au_csv(
    source: ByteSource,
    *,
    subject_id: str,
    confidence_floor: float = 0.75,
) -> SubjectTrace:
    """Parse one OpenFace output file into a SubjectTrace.

    Recognized columns are `timestamp`, `confidence`, `success` and the
    `AU??_r` intensity columns of the 17-AU vocabulary. `frame`, `AU??_c`
    and anything else is ignored. Missing `confidence`/`success` columns
    count as fully confident, successful tracking.
    """
    frame = _read_table(source)

    if "timestamp" not in frame.columns:
        raise MissingColumn("no 'timestamp' column")

    au_columns: dict[str, str] = {}
    for column in frame.columns:
        match = _AU_INTENSITY_RE.match(column)
        if match and is_known_au(match.group(1)):
            au_columns[match.group(1)] = column
    if not au_columns:
        raise MissingColumn("no AU intensity (AU??_r) columns")

    au_ids = tuple(canonical_au_order(au_columns))
    timestamps = _numeric_column(frame, "timestamp")
    steps = np.diff(timestamps)
    if np.any(steps <= 0):
        row = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise NonMonotonicTimestamps(
            f"timestamp {timestamps[row]} at line {row + 2} does not increase"
        )

    n_frames = len(frame)
    intensities = np.column_stack([_numeric_column(frame, au_columns[au]) for au in au_ids])
    intensities = intensities.reshape(n_frames, len(au_ids))

    success = _numeric_column(frame, "success") if "success" in frame.columns else np.ones(n_frames)
    confidence = (
        _numeric_column(frame, "confidence") if "confidence" in frame.columns else np.ones(n_frames)
    )
    frame_valid = (success == 1) & (confidence >= confidence_floor)

    return SubjectTrace(
        subject_id=subject_id,
        timestamps=timestamps,
        au_ids=au_ids,
        intensities=intensities,
        frame_valid=frame_valid,
    )


def serialize_trace_csv(trace: SubjectTrace) -> bytes:
    """Write a trace in the OpenFace column layout; parse_au_csv reads it back exactly."""
    data: dict[str, object] = {
        "frame": np.arange(1, trace.n_frames + 1),
        "timestamp": trace.timestamps,
        "confidence": np.where(trace.frame_valid, 1.0, 0.0),
        "success": trace.frame_valid.astype(int),
    }
    for index, au_id in enumerate(trace.au_ids):
        data[f"{au_id}_r"] = trace.intensities[:, index]
    return pd.DataFrame(data).to_csv(index=False, lineterminator="\n").encode("utf-8")


def parse_stimulus_schedule(source: ByteSource) -> dict[str, StimulusSchedule]:
    frame = _read_table(source)
    missing = [column for column in _SCHEDULE_COLUMNS if column not in frame.columns]
    if missing:
        raise MissingColumn(f"schedule is missing columns: {', '.join(missing)}")

    indices = _numeric_column(frame, "stimulus_index")
    times = _numeric_column(frame, "time_s")

    grouped: dict[str, dict[int, float]] = {}
    for row, (subject_raw, index, time_s) in enumerate(zip(frame["subject_id"], indices, times)):
        line = row + 2
        subject_id = subject_raw.strip()
        if not subject_id:
            raise MalformedRow("empty subject_id", line=line)
        if index != int(index) or index < 1:
            raise MalformedRow(f"stimulus_index must be a positive integer, got {index}", line=line)
        if time_s < 0:
            raise MalformedRow(f"time_s must be >= 0, got {time_s}", line=line)
        entries = grouped.setdefault(subject_id, {})
        if int(index) in entries:
            raise DuplicateStimulusIndex(f"{subject_id}: stimulus_index {int(index)} appears twice")
        entries[int(index)] = float(time_s)

    schedules: dict[str, StimulusSchedule] = {}
    for subject_id in sorted(grouped):
        ordered = [grouped[subject_id][index] for index in sorted(grouped[subject_id])]
        if any(later <= earlier for earlier, later in zip(ordered, ordered[1:])):
            raise NonIncreasingTimes(f"{subject_id}: stimulus times must increase with stimulus_index")
        schedules[subject_id] = StimulusSchedule(subject_id=subject_id, stimulus_times=tuple(ordered))
    return schedules


def serialize_schedule_csv(schedules: Mapping[str, StimulusSchedule]) -> bytes:
    rows = [
        {"subject_id": subject_id, "stimulus_index": index, "time_s": time_s}
        for subject_id in sorted(schedules)
        for index, time_s in enumerate(schedules[subject_id].stimulus_times, start=1)
    ]
    frame = pd.DataFrame(rows, columns=list(_SCHEDULE_COLUMNS))
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def events_to_csv(rows: Iterable[tuple[str, AUEvent]]) -> bytes:
    records = [{"subject_id": subject_id, **event.to_dict()} for subject_id, event in rows]
    frame = pd.DataFrame(records, columns=EVENT_COLUMNS)
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def gestures_to_csv(gestures: Iterable[FacialGesture]) -> bytes:
    names = feature_names()
    records = []
    for gesture in gestures:
        record: dict[str, object] = {
            "subject_id": gesture.subject_id,
            "gesture_id": gesture.gesture_id,
            "member_aus": " ".join(gesture.member_aus),
            "member_count": len(gesture.member_events),
            "start_s": gesture.start_time,
            "apex_s": gesture.apex_time,
            "end_s": gesture.end_time,
        }
        if gesture.features is not None:
            record.update(zip(names, gesture.features.values.tolist()))
        records.append(record)
    columns = ["subject_id", "gesture_id", "member_aus", "member_count", "start_s", "apex_s", "end_s"]
    frame = pd.DataFrame(records, columns=columns + names)
    return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")


def convergence_to_csv(rows: Iterable[tuple[str, Clustering]]) -> bytes:
    records = [
        {
            "subject_id": subject_id,
            "iteration": record.iteration,
            "exemplar_count": record.exemplar_count,
            "net_similarity": record.net_similarity,
        }
        for subject_id, clustering in rows
        for record in clustering.history
    ]
    columns = ["subject_id", "iteration", "exemplar_count", "net_similarity"]
    return pd.DataFrame(records, columns=columns).to_csv(index=False, lineterminator="\n").encode("utf-8")
