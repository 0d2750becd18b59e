from __future__ import annotations

from dataclasses import replace
from typing import Sequence

import numpy as np

from domain.errors import EmptyCohort, MismatchedSizes, ScopeMismatch
from domain.models import (
    FEATURES_PER_AU,
    AUEvent,
    Clustering,
    FacialGesture,
    FeatureVector,
    Mode,
    NormalizationContext,
)
from domain.types import AU_INDEX, INTENSITY_MAX


def assemble_gestures(
    events: Sequence[AUEvent],
    clustering: Clustering,
    subject_id: str,
) -> list[FacialGesture]:
    """One gesture per exemplar, ordered by start time; gesture_id is the position in that order."""
    if len(events) != len(clustering.exemplar_of):
        raise MismatchedSizes(
            f"{len(events)} events but the clustering assigns {len(clustering.exemplar_of)} points"
        )

    members: dict[int, list[AUEvent]] = {}
    for event, exemplar in zip(events, clustering.exemplar_of):
        members.setdefault(exemplar, []).append(event)

    drafts = []
    for exemplar, group in members.items():
        group = sorted(group, key=AUEvent.sort_key)
        drafts.append(
            (
                min(event.onset_time for event in group),
                float(np.median([event.apex_time for event in group])),
                max(event.offset_time for event in group),
                exemplar,
                tuple(group),
            )
        )
    drafts.sort(key=lambda draft: (draft[0], draft[1], draft[3]))

    return [
        FacialGesture(
            gesture_id=gesture_id,
            subject_id=subject_id,
            member_events=group,
            exemplar=exemplar,
            start_time=start,
            apex_time=apex,
            end_time=end,
        )
        for gesture_id, (start, apex, end, exemplar, group) in enumerate(drafts)
    ]


def normalize_cohort(gestures: Sequence[FacialGesture], scope: Mode) -> NormalizationContext:
    """Min/max of duration, rise and fall over every member event in scope.

    SD scope covers a single subject's gestures; SI scope pools all subjects.
    """
    if not gestures:
        raise EmptyCohort("cannot normalize an empty set of gestures")
    if scope is Mode.SD and len({g.subject_id for g in gestures}) > 1:
        raise ScopeMismatch("SD normalization takes the gestures of exactly one subject")

    events = [event for gesture in gestures for event in gesture.member_events]
    durations = np.array([event.duration for event in events])
    rises = np.array([event.rise_rate for event in events])
    falls = np.array([event.fall_rate for event in events])
    return NormalizationContext(
        scope=scope,
        duration_min=float(durations.min()),
        duration_max=float(durations.max()),
        rise_min=float(rises.min()),
        rise_max=float(rises.max()),
        fall_min=float(falls.min()),
        fall_max=float(falls.max()),
    )


def _dominant_event(events: Sequence[AUEvent]) -> AUEvent:
    # Highest apex wins; the remaining keys make the pick independent of list order.
    return min(
        events,
        key=lambda e: (-e.apex_intensity, e.onset_time, e.apex_time, e.offset_time, e.rise_rate, e.fall_rate),
    )


def featurize_gesture(gesture: FacialGesture, norm: NormalizationContext) -> FeatureVector:
    values = np.zeros(len(AU_INDEX) * FEATURES_PER_AU)
    by_au: dict[str, list[AUEvent]] = {}
    for event in gesture.member_events:
        by_au.setdefault(event.au_id, []).append(event)

    for au_id, events in by_au.items():
        event = _dominant_event(events)
        start = AU_INDEX[au_id] * FEATURES_PER_AU
        values[start : start + FEATURES_PER_AU] = (
            1.0,
            min(1.0, max(0.0, event.apex_intensity / INTENSITY_MAX)),
            norm.duration(event.duration),
            norm.rise(event.rise_rate),
            norm.fall(event.fall_rate),
        )
    return FeatureVector(values=values)


def featurize_all(gestures: Sequence[FacialGesture], norm: NormalizationContext) -> list[FacialGesture]:
    return [replace(gesture, features=featurize_gesture(gesture, norm)) for gesture in gestures]
