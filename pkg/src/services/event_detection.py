from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from domain.errors import EvenWindow, InvalidWindow, WindowTooLarge
from domain.models import AUEvent, DetectionParams, ValidatedTrace
from domain.series_utils import true_runs
from logging_utils import log_debug


def smooth_series(values: Sequence[float] | np.ndarray, window: int) -> np.ndarray:
    """Centered moving average; edge frames average only the in-range neighbours."""
    series = np.asarray(values, dtype=float)
    if window < 1:
        raise InvalidWindow(f"window must be >= 1, got {window}")
    if window % 2 == 0:
        raise EvenWindow(f"window must be odd, got {window}")
    if window > len(series):
        raise WindowTooLarge(f"window {window} exceeds sequence length {len(series)}")
    if window == 1:
        return series.copy()

    half = window // 2
    padded = np.pad(series, half, constant_values=np.nan)
    return np.nanmean(sliding_window_view(padded, window), axis=1)


def _effective_window(window: int, n_frames: int) -> int:
    if window <= n_frames:
        return window
    return n_frames if n_frames % 2 else n_frames - 1


def _channel_events(
    au_id: str,
    timestamps: np.ndarray,
    smoothed: np.ndarray,
    params: DetectionParams,
) -> list[AUEvent]:
    events: list[AUEvent] = []
    for start, end in true_runs(smoothed >= params.activation_threshold):
        if end - start + 1 < params.min_duration_frames:
            continue
        # argmax picks the earliest frame on ties.
        apex = start + int(np.argmax(smoothed[start : end + 1]))
        onset_t, apex_t, offset_t = timestamps[start], timestamps[apex], timestamps[end]
        onset_i, apex_i, offset_i = smoothed[start], smoothed[apex], smoothed[end]
        rise = (apex_i - onset_i) / (apex_t - onset_t) if apex_t > onset_t else 0.0
        fall = (apex_i - offset_i) / (offset_t - apex_t) if offset_t > apex_t else 0.0
        events.append(
            AUEvent(
                au_id=au_id,
                onset_time=float(onset_t),
                apex_time=float(apex_t),
                offset_time=float(offset_t),
                onset_intensity=float(onset_i),
                apex_intensity=float(apex_i),
                offset_intensity=float(offset_i),
                rise_rate=float(rise),
                fall_rate=float(fall),
            )
        )
    return events


def detect_events(trace: ValidatedTrace, params: DetectionParams | None = None) -> list[AUEvent]:
    """Segment every AU channel into threshold runs.

    A run is a maximal stretch of frames whose smoothed intensity is at
    least the activation threshold. Runs shorter than min_duration_frames
    are dropped; runs touching the trace edges are kept.
    """
    params = params or DetectionParams()
    data = trace.trace
    if data.n_frames == 0:
        return []

    window = _effective_window(params.smoothing_window, data.n_frames)
    events: list[AUEvent] = []
    for index, au_id in enumerate(data.au_ids):
        smoothed = smooth_series(data.intensities[:, index], window)
        events.extend(_channel_events(au_id, data.timestamps, smoothed, params))

    events.sort(key=AUEvent.sort_key)
    log_debug("events_detected", subject_id=data.subject_id, events=len(events), window=window)
    return events
