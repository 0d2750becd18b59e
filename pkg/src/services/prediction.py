"""Stimulus alignment, prototype ranking and cohort metrics."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from domain.errors import (
    EmptyCandidates,
    EmptyList,
    ExcludedSubject,
    LengthMismatch,
    NoIncludedSubjects,
)
from domain.models import (
    FacialGesture,
    FeatureVector,
    MetricsReport,
    Mode,
    RankedCandidate,
    SiStrategy,
    StimulusAlignment,
    StimulusSchedule,
    SubjectResult,
)

DEFAULT_RESPONSE_WINDOW = 2.0
DEFAULT_TARGET_STIMULUS = 3
DEFAULT_TOPK = (2, 10)


@dataclass(frozen=True)
class SubjectGestures:
    """One subject's featurized gestures together with their stimulus alignment."""

    subject_id: str
    gestures: tuple[FacialGesture, ...]
    alignment: StimulusAlignment

    def by_id(self, gesture_id: int) -> FacialGesture:
        return next(g for g in self.gestures if g.gesture_id == gesture_id)

    def training_vectors(self) -> list[FeatureVector]:
        vectors = []
        for gesture_id in self.alignment.training_ids:
            features = self.by_id(gesture_id).features
            if features is None:
                raise ValueError(f"{self.subject_id}: gesture {gesture_id} has no features")
            vectors.append(features)
        return vectors


def align_stimuli(
    gestures: Sequence[FacialGesture],
    schedule: StimulusSchedule,
    window: float = DEFAULT_RESPONSE_WINDOW,
    *,
    target_stimulus: int = DEFAULT_TARGET_STIMULUS,
) -> StimulusAlignment:
    """Match each stimulus to the earliest unmatched gesture whose apex falls in [t, t + window].

    Gestures peaking before a stimulus are never matched to it. A subject
    missing a match for any stimulus up to target_stimulus is excluded.
    """
    if window <= 0:
        raise ValueError(f"response window must be > 0, got {window}")

    matched: set[int] = set()
    matches: list[int | None] = []
    for time_s in schedule.stimulus_times:
        candidates = [
            g
            for g in gestures
            if g.gesture_id not in matched and time_s <= g.apex_time <= time_s + window
        ]
        if not candidates:
            matches.append(None)
            continue
        chosen = min(candidates, key=lambda g: (g.apex_time, g.gesture_id))
        matched.add(chosen.gesture_id)
        matches.append(chosen.gesture_id)

    reason = None
    if len(matches) < target_stimulus:
        reason = (
            f"schedule lists {len(matches)} stimuli; stimulus {target_stimulus} is required"
        )
    else:
        missing = [index + 1 for index, gid in enumerate(matches[:target_stimulus]) if gid is None]
        if missing:
            listed = ", ".join(str(index) for index in missing)
            reason = f"no significant facial response to stimulus {listed}"

    return StimulusAlignment(
        subject_id=schedule.subject_id,
        response_window=window,
        stimulus_times=tuple(schedule.stimulus_times),
        matches=tuple(matches),
        target_stimulus=target_stimulus,
        excluded=reason is not None,
        reason=reason,
    )


def prototype_mean(vectors: Sequence[FeatureVector]) -> FeatureVector:
    if not vectors:
        raise EmptyList("prototype needs at least one vector")
    lengths = {vector.values.shape for vector in vectors}
    if len(lengths) != 1:
        raise LengthMismatch(f"vectors differ in length: {sorted(lengths)}")
    return FeatureVector(values=np.mean(np.stack([vector.values for vector in vectors]), axis=0))


def _candidate_matrix(candidates: Sequence[FacialGesture]) -> np.ndarray:
    if not candidates:
        raise EmptyCandidates("no candidate gestures to rank")
    missing = [g.gesture_id for g in candidates if g.features is None]
    if missing:
        raise ValueError(f"candidates without features: {missing}")
    return np.stack([g.features.values for g in candidates])  # type: ignore[union-attr]


def _ordered(candidates: Sequence[FacialGesture], distances: np.ndarray) -> list[RankedCandidate]:
    order = sorted(
        range(len(candidates)),
        key=lambda i: (distances[i], candidates[i].apex_time, candidates[i].gesture_id),
    )
    return [RankedCandidate(candidates[i].gesture_id, float(distances[i])) for i in order]


def rank_candidates(prototype: FeatureVector, candidates: Sequence[FacialGesture]) -> list[RankedCandidate]:
    """Ascending Euclidean distance to the prototype; ties go to the earlier apex, then lower id."""
    matrix = _candidate_matrix(candidates)
    distances = np.linalg.norm(matrix - prototype.values[None, :], axis=1)
    return _ordered(candidates, distances)


def rank_candidates_to_set(
    references: Sequence[FeatureVector],
    candidates: Sequence[FacialGesture],
) -> list[RankedCandidate]:
    """Rank by distance to the nearest reference vector."""
    if not references:
        raise EmptyList("reference set is empty")
    matrix = _candidate_matrix(candidates)
    refs = np.stack([vector.values for vector in references])
    distances = np.linalg.norm(matrix[:, None, :] - refs[None, :, :], axis=2).min(axis=1)
    return _ordered(candidates, distances)


def evaluate_subject(
    subject: SubjectGestures,
    mode: Mode,
    pool: Sequence[FeatureVector] | None = None,
    *,
    si_strategy: SiStrategy = SiStrategy.POOLED_MEAN,
) -> SubjectResult:
    """Rank the target-stimulus gesture among every gesture except the training responses.

    SD builds the prototype from the subject's own training gestures. SI
    uses `pool`, the training vectors of all subjects featurized under one
    pooled normalization.
    """
    alignment = subject.alignment
    if alignment.excluded:
        raise ExcludedSubject(subject.subject_id, alignment.reason or "excluded")
    gamma_id = alignment.target_id
    if gamma_id is None:
        raise ExcludedSubject(subject.subject_id, "no target response")

    training = set(alignment.training_ids)
    candidates = [g for g in subject.gestures if g.gesture_id not in training]

    if mode is Mode.SD:
        ranking = rank_candidates(prototype_mean(subject.training_vectors()), candidates)
    else:
        if not pool:
            raise EmptyList("SI evaluation needs a pooled set of training vectors")
        if si_strategy is SiStrategy.NEAREST_SET:
            ranking = rank_candidates_to_set(pool, candidates)
        else:
            ranking = rank_candidates(prototype_mean(pool), candidates)

    rank = next(position for position, item in enumerate(ranking, start=1) if item.gesture_id == gamma_id)
    return SubjectResult(
        subject_id=subject.subject_id,
        mode=mode,
        rank_of_gamma=rank,
        candidate_count=len(candidates),
        gamma_id=gamma_id,
        ranking=tuple(ranking),
    )


def top_fraction_cutoff(candidate_count: int, fraction_pct: int = 15) -> int:
    """max(1, round(fraction * N)) with halves rounded up."""
    return max(1, (fraction_pct * candidate_count + 50) // 100)


def aggregate_metrics(
    results: Iterable[SubjectResult],
    *,
    mode: Mode | None = None,
    topk: Sequence[int] = DEFAULT_TOPK,
) -> MetricsReport:
    results = list(results)
    included = [r for r in results if not r.excluded]
    if not included:
        raise NoIncludedSubjects("every subject was excluded")
    if mode is None:
        mode = included[0].mode

    ranks = np.array([r.rank_of_gamma for r in included], dtype=float)
    counts = np.array([r.candidate_count for r in included], dtype=float)
    cutoffs = np.array([top_fraction_cutoff(r.candidate_count) for r in included], dtype=float)

    def pct(hits: np.ndarray) -> float:
        return float(100.0 * hits.sum() / len(included))

    return MetricsReport(
        mode=mode,
        top2_pct=pct(ranks <= 2),
        top10_pct=pct(ranks <= 10),
        top15pct_pct=pct(ranks <= cutoffs),
        median_rank=float(np.median(ranks)),
        included_subjects=len(included),
        excluded_subjects=len(results) - len(included),
        median_candidate_count=float(np.median(counts)),
        topk_pct={int(k): pct(ranks <= k) for k in sorted(set(topk))},
    )
