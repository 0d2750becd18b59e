from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np

from domain.types import AU_INDEX, AU_VOCABULARY, is_known_au

FEATURES_PER_AU = 5
FEATURE_LENGTH = len(AU_VOCABULARY) * FEATURES_PER_AU
FEATURE_SLOTS = ("presence", "apex", "duration", "rise", "fall")


class Mode(str, Enum):
    SD = "sd"
    SI = "si"


class SiStrategy(str, Enum):
    POOLED_MEAN = "pooled_mean"
    NEAREST_SET = "nearest_set"


class WarningKind(str, Enum):
    CLAMPED = "clamped"
    INTERPOLATED = "interpolated"


class GestureLabel(str, Enum):
    RESPONSE = "response"
    DISTRACTOR = "distractor"
    FLINCH = "flinch"


def feature_names() -> list[str]:
    return [f"{au}_{slot}" for au in AU_VOCABULARY for slot in FEATURE_SLOTS]


@dataclass(frozen=True)
class SubjectTrace:
    """Per-frame AU intensities for one subject, AUs in canonical order."""

    subject_id: str
    timestamps: np.ndarray
    au_ids: tuple[str, ...]
    intensities: np.ndarray
    frame_valid: np.ndarray

    def __post_init__(self) -> None:
        frames = len(self.timestamps)
        if self.intensities.shape != (frames, len(self.au_ids)):
            raise ValueError(
                f"intensities shape {self.intensities.shape} does not match "
                f"{frames} frames x {len(self.au_ids)} AUs"
            )
        if len(self.frame_valid) != frames:
            raise ValueError("frame_valid length must match timestamps")
        if len(set(self.au_ids)) != len(self.au_ids):
            raise ValueError("au_ids must be unique")
        unknown = [au for au in self.au_ids if not is_known_au(au)]
        if unknown:
            raise ValueError(f"unknown AU ids: {unknown}")

    @property
    def n_frames(self) -> int:
        return len(self.timestamps)

    def channel(self, au_id: str) -> np.ndarray:
        return self.intensities[:, self.au_ids.index(au_id)]

    def same_as(self, other: "SubjectTrace") -> bool:
        return (
            self.subject_id == other.subject_id
            and self.au_ids == other.au_ids
            and np.array_equal(self.timestamps, other.timestamps)
            and np.array_equal(self.intensities, other.intensities)
            and np.array_equal(self.frame_valid, other.frame_valid)
        )


@dataclass(frozen=True)
class TraceWarning:
    kind: WarningKind
    frame_start: int
    frame_end: int
    au_id: str | None = None
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "frame_start": self.frame_start,
            "frame_end": self.frame_end,
            "au_id": self.au_id,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ValidatedTrace:
    trace: SubjectTrace
    valid_fraction: float

    @property
    def subject_id(self) -> str:
        return self.trace.subject_id


@dataclass(frozen=True)
class StimulusSchedule:
    subject_id: str
    stimulus_times: tuple[float, ...]

    def to_dict(self) -> dict[str, Any]:
        return {"subject_id": self.subject_id, "stimulus_times": list(self.stimulus_times)}


@dataclass(frozen=True)
class DetectionParams:
    activation_threshold: float = 0.5
    min_duration_frames: int = 3
    smoothing_window: int = 5


@dataclass(frozen=True)
class AUEvent:
    au_id: str
    onset_time: float
    apex_time: float
    offset_time: float
    onset_intensity: float
    apex_intensity: float
    offset_intensity: float
    rise_rate: float
    fall_rate: float

    @property
    def duration(self) -> float:
        return self.offset_time - self.onset_time

    def sort_key(self) -> tuple[float, int]:
        return self.onset_time, AU_INDEX[self.au_id]

    def to_dict(self) -> dict[str, Any]:
        return {
            "au_id": self.au_id,
            "onset_s": self.onset_time,
            "apex_s": self.apex_time,
            "offset_s": self.offset_time,
            "onset_i": self.onset_intensity,
            "apex_i": self.apex_intensity,
            "offset_i": self.offset_intensity,
            "rise_rate": self.rise_rate,
            "fall_rate": self.fall_rate,
        }


@dataclass(frozen=True)
class SimilarityMatrix:
    """Dense similarities; the diagonal holds the per-point preference."""

    s: np.ndarray
    preference: np.ndarray

    def __post_init__(self) -> None:
        if self.s.ndim != 2 or self.s.shape[0] != self.s.shape[1]:
            raise ValueError("similarity matrix must be square")
        if self.preference.shape != (self.s.shape[0],):
            raise ValueError("preference must have one entry per point")
        if not np.all(np.isfinite(self.s)):
            raise ValueError("similarities must be finite")
        if not np.array_equal(np.diag(self.s), self.preference):
            raise ValueError("diagonal must equal the preference vector")

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @classmethod
    def from_offdiagonal(cls, s: np.ndarray, preference: np.ndarray | float) -> "SimilarityMatrix":
        matrix = np.array(s, dtype=float, copy=True)
        pref = np.broadcast_to(np.asarray(preference, dtype=float), (matrix.shape[0],)).copy()
        np.fill_diagonal(matrix, pref)
        return cls(s=matrix, preference=pref)


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    exemplar_count: int
    net_similarity: float | None


@dataclass(frozen=True)
class Clustering:
    exemplar_of: tuple[int, ...]
    exemplars: tuple[int, ...]
    converged: bool
    iterations_run: int
    net_similarity: float
    history: tuple[IterationRecord, ...] = ()

    @property
    def cluster_count(self) -> int:
        return len(self.exemplars)

    def partition(self) -> frozenset[frozenset[int]]:
        groups: dict[int, set[int]] = {}
        for point, exemplar in enumerate(self.exemplar_of):
            groups.setdefault(exemplar, set()).add(point)
        return frozenset(frozenset(members) for members in groups.values())


@dataclass(frozen=True)
class FeatureVector:
    """85 values: for each AU in canonical order presence, apex/5, duration, rise, fall."""

    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (FEATURE_LENGTH,):
            raise ValueError(f"feature vector must have length {FEATURE_LENGTH}")

    def slot(self, au_id: str) -> np.ndarray:
        start = AU_INDEX[au_id] * FEATURES_PER_AU
        return self.values[start : start + FEATURES_PER_AU]

    @classmethod
    def zeros(cls) -> "FeatureVector":
        return cls(values=np.zeros(FEATURE_LENGTH))


@dataclass(frozen=True)
class NormalizationContext:
    scope: Mode
    duration_min: float
    duration_max: float
    rise_min: float
    rise_max: float
    fall_min: float
    fall_max: float

    @staticmethod
    def _scale(value: float, lo: float, hi: float) -> float:
        if hi <= lo:
            return 0.0
        return float(min(1.0, max(0.0, (value - lo) / (hi - lo))))

    def duration(self, value: float) -> float:
        return self._scale(value, self.duration_min, self.duration_max)

    def rise(self, value: float) -> float:
        return self._scale(value, self.rise_min, self.rise_max)

    def fall(self, value: float) -> float:
        return self._scale(value, self.fall_min, self.fall_max)


@dataclass(frozen=True)
class FacialGesture:
    gesture_id: int
    subject_id: str
    member_events: tuple[AUEvent, ...]
    exemplar: int
    start_time: float
    apex_time: float
    end_time: float
    features: FeatureVector | None = None

    @property
    def member_aus(self) -> list[str]:
        return sorted({event.au_id for event in self.member_events}, key=AU_INDEX.__getitem__)


@dataclass(frozen=True)
class StimulusAlignment:
    subject_id: str
    response_window: float
    stimulus_times: tuple[float, ...]
    matches: tuple[int | None, ...]
    target_stimulus: int = 3
    excluded: bool = False
    reason: str | None = None

    @property
    def training_ids(self) -> list[int]:
        return [gid for gid in self.matches[: self.target_stimulus - 1] if gid is not None]

    @property
    def target_id(self) -> int | None:
        if len(self.matches) < self.target_stimulus:
            return None
        return self.matches[self.target_stimulus - 1]


@dataclass(frozen=True)
class RankedCandidate:
    gesture_id: int
    distance: float

    def to_dict(self) -> dict[str, Any]:
        return {"gesture_id": self.gesture_id, "distance": self.distance}


@dataclass(frozen=True)
class SubjectResult:
    subject_id: str
    mode: Mode
    rank_of_gamma: int | None
    candidate_count: int
    excluded: bool = False
    reason: str | None = None
    gamma_id: int | None = None
    ranking: tuple[RankedCandidate, ...] = ()

    @classmethod
    def excluded_result(cls, subject_id: str, mode: Mode, reason: str) -> "SubjectResult":
        return cls(
            subject_id=subject_id,
            mode=mode,
            rank_of_gamma=None,
            candidate_count=0,
            excluded=True,
            reason=reason,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "mode": self.mode.value,
            "rank_of_gamma": self.rank_of_gamma,
            "candidate_count": self.candidate_count,
            "excluded": self.excluded,
            "reason": self.reason,
            "gamma_id": self.gamma_id,
            "ranking": [candidate.to_dict() for candidate in self.ranking],
        }


@dataclass(frozen=True)
class MetricsReport:
    mode: Mode
    top2_pct: float
    top10_pct: float
    top15pct_pct: float
    median_rank: float
    included_subjects: int
    excluded_subjects: int
    median_candidate_count: float
    topk_pct: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode.value,
            "top2_pct": self.top2_pct,
            "top10_pct": self.top10_pct,
            "top15pct_pct": self.top15pct_pct,
            "median_rank": self.median_rank,
            "included_subjects": self.included_subjects,
            "excluded_subjects": self.excluded_subjects,
            "median_candidate_count": self.median_candidate_count,
            "topk_pct": {str(k): v for k, v in sorted(self.topk_pct.items())},
        }


# Synthetic cohorts


@dataclass(frozen=True)
class TemplatePulse:
    au_id: str
    onset_lag: float
    rise_time: float
    fall_time: float
    apex_intensity: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "au_id": self.au_id,
            "onset_lag": self.onset_lag,
            "rise_time": self.rise_time,
            "fall_time": self.fall_time,
            "apex_intensity": self.apex_intensity,
        }


@dataclass(frozen=True)
class SubjectProfile:
    subject_id: str
    response_template: tuple[TemplatePulse, ...]
    time_jitter: float = 0.0
    intensity_jitter: float = 0.0
    distractor_count: int = 0
    distractor_spread: tuple[float, float] | None = None
    seed: int = 0
    avoid_response_windows: bool = True
    flinch_count: int = 0

    def __post_init__(self) -> None:
        if not self.response_template:
            raise ValueError("response_template must not be empty")
        for pulse in self.response_template:
            if not is_known_au(pulse.au_id):
                raise ValueError(f"template AU {pulse.au_id!r} is not in the AU vocabulary")
        if self.time_jitter < 0 or self.intensity_jitter < 0:
            raise ValueError("jitter must be >= 0")
        if self.distractor_count < 0 or self.flinch_count < 0:
            raise ValueError("distractor_count and flinch_count must be >= 0")


@dataclass(frozen=True)
class GroundTruthPulse:
    au_id: str
    onset_time: float
    apex_time: float
    offset_time: float
    apex_intensity: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "au_id": self.au_id,
            "onset_s": self.onset_time,
            "apex_s": self.apex_time,
            "offset_s": self.offset_time,
            "apex_i": self.apex_intensity,
        }


@dataclass(frozen=True)
class GroundTruthGesture:
    label: GestureLabel
    stimulus_index: int | None
    pulses: tuple[GroundTruthPulse, ...]

    @property
    def start_time(self) -> float:
        return min(p.onset_time for p in self.pulses)

    @property
    def end_time(self) -> float:
        return max(p.offset_time for p in self.pulses)

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label.value,
            "stimulus_index": self.stimulus_index,
            "member_aus": [p.au_id for p in self.pulses],
            "start_s": self.start_time,
            "end_s": self.end_time,
            "pulses": [p.to_dict() for p in self.pulses],
        }


@dataclass(frozen=True)
class GroundTruth:
    subject_id: str
    gestures: tuple[GroundTruthGesture, ...]

    def responses(self) -> list[GroundTruthGesture]:
        return [g for g in self.gestures if g.label is GestureLabel.RESPONSE]

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject_id": self.subject_id,
            "gestures": [g.to_dict() for g in self.gestures],
        }
