from __future__ import annotations

import numpy as np
import pytest

from domain.models import AUEvent, FacialGesture, FeatureVector, SubjectTrace


@pytest.fixture
def make_trace():
    def _make(
        channels: dict[str, np.ndarray] | None = None,
        *,
        n_frames: int = 60,
        fps: float = 30.0,
        subject_id: str = "S01",
        valid: np.ndarray | None = None,
    ) -> SubjectTrace:
        channels = channels or {"AU12": np.zeros(n_frames)}
        au_ids = tuple(sorted(channels, key=lambda au: int(au[2:])))
        n_frames = len(next(iter(channels.values())))
        return SubjectTrace(
            subject_id=subject_id,
            timestamps=np.arange(n_frames) / fps,
            au_ids=au_ids,
            intensities=np.column_stack([np.asarray(channels[au], dtype=float) for au in au_ids]),
            frame_valid=np.ones(n_frames, dtype=bool) if valid is None else valid,
        )

    return _make


@pytest.fixture
def make_event():
    def _make(
        onset: float,
        apex: float | None = None,
        offset: float | None = None,
        *,
        au_id: str = "AU12",
        apex_intensity: float = 2.0,
    ) -> AUEvent:
        apex = onset + 0.5 if apex is None else apex
        offset = apex + 0.5 if offset is None else offset
        return AUEvent(
            au_id=au_id,
            onset_time=onset,
            apex_time=apex,
            offset_time=offset,
            onset_intensity=0.5,
            apex_intensity=apex_intensity,
            offset_intensity=0.5,
            rise_rate=(apex_intensity - 0.5) / (apex - onset) if apex > onset else 0.0,
            fall_rate=(apex_intensity - 0.5) / (offset - apex) if offset > apex else 0.0,
        )

    return _make


@pytest.fixture
def make_gesture(make_event):
    def _make(
        gesture_id: int,
        apex: float,
        *,
        subject_id: str = "S01",
        features: np.ndarray | None = None,
        au_ids: tuple[str, ...] = ("AU12",),
    ) -> FacialGesture:
        events = tuple(make_event(apex - 0.5, apex, apex + 0.5, au_id=au) for au in au_ids)
        return FacialGesture(
            gesture_id=gesture_id,
            subject_id=subject_id,
            member_events=events,
            exemplar=gesture_id,
            start_time=apex - 0.5,
            apex_time=apex,
            end_time=apex + 0.5,
            features=FeatureVector(values=features) if features is not None else None,
        )

    return _make
