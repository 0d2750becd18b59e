from __future__ import annotations

import numpy as np

from domain.errors import TooFewValidFrames
from domain.models import SubjectTrace, TraceWarning, ValidatedTrace, WarningKind
from domain.series_utils import true_runs
from domain.types import INTENSITY_MAX, INTENSITY_MIN
from logging_utils import log_debug, log_warning


def validate_trace(
    trace: SubjectTrace,
    *,
    min_valid_fraction: float = 0.5,
) -> tuple[ValidatedTrace, list[TraceWarning]]:
    """Clamp intensities into [0, 5] and fill invalid frames.

    Invalid frames are filled by linear interpolation in time between the
    nearest valid neighbours; leading and trailing invalid spans hold the
    nearest valid value. Clamping happens first, so interpolated values
    always lie between their two anchors.
    """
    n_frames = trace.n_frames
    valid = trace.frame_valid.astype(bool)
    valid_fraction = float(valid.mean()) if n_frames else 0.0
    if n_frames == 0 or valid_fraction < min_valid_fraction or not valid.any():
        log_warning(
            "trace_rejected",
            subject_id=trace.subject_id,
            valid_fraction=round(valid_fraction, 4),
            min_valid_fraction=min_valid_fraction,
        )
        raise TooFewValidFrames(
            f"{trace.subject_id}: {valid_fraction:.1%} valid frames, "
            f"below the {min_valid_fraction:.1%} minimum"
        )

    warnings: list[TraceWarning] = []
    raw = trace.intensities
    clamped = np.clip(raw, INTENSITY_MIN, INTENSITY_MAX)
    for frame_index, au_index in zip(*np.nonzero(clamped != raw)):
        warnings.append(
            TraceWarning(
                kind=WarningKind.CLAMPED,
                frame_start=int(frame_index),
                frame_end=int(frame_index),
                au_id=trace.au_ids[au_index],
                detail=f"{raw[frame_index, au_index]!r} clamped to {clamped[frame_index, au_index]!r}",
            )
        )

    filled = clamped.copy()
    invalid = ~valid
    if invalid.any():
        valid_times = trace.timestamps[valid]
        invalid_times = trace.timestamps[invalid]
        for au_index in range(len(trace.au_ids)):
            # np.interp holds the edge values beyond the first/last anchor.
            filled[invalid, au_index] = np.interp(invalid_times, valid_times, clamped[valid, au_index])
        for start, end in true_runs(invalid):
            warnings.append(
                TraceWarning(
                    kind=WarningKind.INTERPOLATED,
                    frame_start=start,
                    frame_end=end,
                    detail=f"{end - start + 1} invalid frame(s) interpolated",
                )
            )

    validated = SubjectTrace(
        subject_id=trace.subject_id,
        timestamps=trace.timestamps,
        au_ids=trace.au_ids,
        intensities=filled,
        frame_valid=trace.frame_valid.copy(),
    )
    log_debug(
        "trace_validated",
        subject_id=trace.subject_id,
        frames=n_frames,
        valid_fraction=round(valid_fraction, 4),
        warnings=len(warnings),
    )
    return ValidatedTrace(trace=validated, valid_fraction=valid_fraction), warnings
