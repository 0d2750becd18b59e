"""Seeded synthetic AU cohorts with known ground truth.

Every gesture is a set of triangular AU pulses: linear rise from zero at
onset to the apex intensity, linear fall back to zero at offset. Pulses are
summed and clamped to the intensity range.

Per-subject seeds come from a splitmix64 stream over the master seed:
seed_i = mix(master + i * 0x9E3779B97F4A7C15). Inside a subject,
responses, flinches and distractors draw from independent child streams,
so changing the distractor count never moves a response pulse.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from domain.errors import ScheduleOverflow
from domain.models import (
    GestureLabel,
    GroundTruth,
    GroundTruthGesture,
    GroundTruthPulse,
    StimulusSchedule,
    SubjectProfile,
    SubjectTrace,
    TemplatePulse,
)
from domain.types import AU_VOCABULARY, INTENSITY_MAX, INTENSITY_MIN, canonical_au_order
from logging_utils import log_debug, log_info

DEFAULT_FPS = 30.0
DEFAULT_LENGTH_S = 300.0
DEFAULT_DISTRACTORS = 40
GESTURE_GAP_S = 1.5
FLINCH_LEAD_S = 0.3
MIN_PHASE_S = 0.1
MIN_APEX = 1.0

ONSET_LAG_RANGE = (0.0, 0.3)
RISE_RANGE = (0.3, 0.6)
FALL_RANGE = (0.4, 1.2)
APEX_RANGE = (1.5, 4.5)

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_PROFILE_STREAM = 0
_TRACE_STREAM = 1


def splitmix64(value: int) -> int:
    z = (value + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, index: int) -> int:
    """The index-th output of a splitmix64 generator seeded with master_seed."""
    return splitmix64((master_seed + index * _GOLDEN) & _MASK64)


def random_template(
    rng: np.random.Generator,
    *,
    min_aus: int = 2,
    max_aus: int = 4,
) -> tuple[TemplatePulse, ...]:
    """Random pulse set over distinct AUs, listed in vocabulary order."""
    count = int(rng.integers(min_aus, max_aus + 1))
    chosen = rng.choice(len(AU_VOCABULARY), size=count, replace=False)
    pulses = []
    for au_id in canonical_au_order(AU_VOCABULARY[int(i)] for i in chosen):
        pulses.append(
            TemplatePulse(
                au_id=au_id,
                onset_lag=float(rng.uniform(*ONSET_LAG_RANGE)),
                rise_time=float(rng.uniform(*RISE_RANGE)),
                fall_time=float(rng.uniform(*FALL_RANGE)),
                apex_intensity=float(rng.uniform(*APEX_RANGE)),
            )
        )
    return tuple(pulses)


def template_span(template: Sequence[TemplatePulse]) -> float:
    return max(p.onset_lag + p.rise_time + p.fall_time for p in template)


def _jittered(
    template: Sequence[TemplatePulse],
    start: float,
    rng: np.random.Generator,
    time_jitter: float,
    intensity_jitter: float,
) -> tuple[GroundTruthPulse, ...]:
    pulses = []
    for pulse in template:
        # Draw count stays fixed at four per pulse so streams line up for every sigma.
        noise = rng.normal(0.0, 1.0, size=4)
        lag = max(0.0, pulse.onset_lag + time_jitter * noise[0])
        rise = max(MIN_PHASE_S, pulse.rise_time + time_jitter * noise[1])
        fall = max(MIN_PHASE_S, pulse.fall_time + time_jitter * noise[2])
        apex = min(INTENSITY_MAX, max(MIN_APEX, pulse.apex_intensity + intensity_jitter * noise[3]))
        onset = start + lag
        pulses.append(
            GroundTruthPulse(
                au_id=pulse.au_id,
                onset_time=onset,
                apex_time=onset + rise,
                offset_time=onset + rise + fall,
                apex_intensity=apex,
            )
        )
    return tuple(pulses)


def _overlaps(start: float, end: float, occupied: Sequence[tuple[float, float]], gap: float) -> bool:
    return any(start < hi + gap and lo - gap < end for lo, hi in occupied)


def _free_starts(
    lo: float,
    hi: float,
    span: float,
    occupied: Sequence[tuple[float, float]],
    gap: float,
) -> list[tuple[float, float]]:
    """Intervals of start times whose [start, start + span] keeps `gap` clear of every occupied span."""
    free = [(lo, hi - span)] if hi - span >= lo else []
    for busy_lo, busy_hi in sorted(occupied):
        blocked_lo, blocked_hi = busy_lo - gap - span, busy_hi + gap
        next_free = []
        for a, b in free:
            if blocked_hi <= a or blocked_lo >= b:
                next_free.append((a, b))
                continue
            if blocked_lo > a:
                next_free.append((a, blocked_lo))
            if blocked_hi < b:
                next_free.append((blocked_hi, b))
        free = next_free
    return [(a, b) for a, b in free if b > a]


def _sample_start(rng: np.random.Generator, free: Sequence[tuple[float, float]]) -> float:
    lengths = np.array([b - a for a, b in free])
    offset = float(rng.uniform(0.0, lengths.sum()))
    for (a, _), length in zip(free, lengths):
        if offset <= length:
            return a + offset
        offset -= length
    return free[-1][1]


def _render(timestamps: np.ndarray, gestures: Sequence[GroundTruthGesture]) -> tuple[tuple[str, ...], np.ndarray]:
    au_ids = tuple(AU_VOCABULARY)
    column = {au_id: index for index, au_id in enumerate(au_ids)}
    intensities = np.zeros((len(timestamps), len(au_ids)))
    for gesture in gestures:
        for pulse in gesture.pulses:
            intensities[:, column[pulse.au_id]] += np.interp(
                timestamps,
                [pulse.onset_time, pulse.apex_time, pulse.offset_time],
                [0.0, pulse.apex_intensity, 0.0],
                left=0.0,
                right=0.0,
            )
    return au_ids, np.clip(intensities, INTENSITY_MIN, INTENSITY_MAX)


def generate_subject_trace(
    profile: SubjectProfile,
    schedule: StimulusSchedule,
    fps: float = DEFAULT_FPS,
    length: float = DEFAULT_LENGTH_S,
) -> tuple[SubjectTrace, GroundTruth]:
    """Render one subject: a template response per stimulus, optional flinches, then distractors.

    Distractors use random AU subsets and are placed uniformly over the
    free time left after responses (unless avoidance is off) and earlier
    gestures, with a clear gap between neighbours.
    """
    if fps <= 0:
        raise ValueError(f"fps must be > 0, got {fps}")
    if length <= 0:
        raise ValueError(f"length must be > 0, got {length}")

    n_frames = int(round(length * fps))
    timestamps = np.arange(n_frames) / fps
    last_time = float(timestamps[-1]) if n_frames else 0.0
    response_rng, flinch_rng, distractor_rng = (
        np.random.default_rng(child) for child in np.random.SeedSequence(profile.seed).spawn(3)
    )

    gestures: list[GroundTruthGesture] = []
    for index, time_s in enumerate(schedule.stimulus_times, start=1):
        pulses = _jittered(
            profile.response_template, time_s, response_rng, profile.time_jitter, profile.intensity_jitter
        )
        gesture = GroundTruthGesture(label=GestureLabel.RESPONSE, stimulus_index=index, pulses=pulses)
        if gesture.end_time > last_time:
            raise ScheduleOverflow(
                f"{profile.subject_id}: response to stimulus {index} ends at {gesture.end_time:.3f}s, "
                f"past the {last_time:.3f}s trace end"
            )
        gestures.append(gesture)
    responses = [(g.start_time, g.end_time) for g in gestures]

    span = template_span(profile.response_template)
    flinches: list[GroundTruthGesture] = []
    stimuli = schedule.stimulus_times
    for number in range(profile.flinch_count):
        if not stimuli:
            raise ScheduleOverflow(f"{profile.subject_id}: flinches need at least one stimulus")
        time_s = stimuli[number % len(stimuli)]
        depth = number // len(stimuli)
        start = time_s - FLINCH_LEAD_S - span - depth * (span + GESTURE_GAP_S)
        pulses = _jittered(
            profile.response_template, start, flinch_rng, profile.time_jitter, profile.intensity_jitter
        )
        flinch = GroundTruthGesture(label=GestureLabel.FLINCH, stimulus_index=None, pulses=pulses)
        peaks_early = max(p.apex_time for p in pulses) < time_s
        if start < 0 or not peaks_early or _overlaps(flinch.start_time, flinch.end_time, responses, 0.0):
            raise ScheduleOverflow(f"{profile.subject_id}: no room for flinch {number + 1} before {time_s}s")
        flinches.append(flinch)
    gestures.extend(flinches)

    occupied = [(g.start_time, g.end_time) for g in flinches]
    if profile.avoid_response_windows:
        occupied.extend(responses)
    lo, hi = profile.distractor_spread or (0.0, last_time)
    hi = min(hi, last_time)
    for number in range(profile.distractor_count):
        template = random_template(distractor_rng, min_aus=1, max_aus=4)
        free = _free_starts(lo, hi, template_span(template), occupied, GESTURE_GAP_S)
        if not free:
            raise ScheduleOverflow(
                f"{profile.subject_id}: no room for distractor {number + 1} of {profile.distractor_count}"
            )
        start = _sample_start(distractor_rng, free)
        pulses = _jittered(template, start, distractor_rng, 0.0, 0.0)
        distractor = GroundTruthGesture(label=GestureLabel.DISTRACTOR, stimulus_index=None, pulses=pulses)
        occupied.append((distractor.start_time, distractor.end_time))
        gestures.append(distractor)

    gestures.sort(key=lambda g: (g.start_time, g.end_time))
    au_ids, intensities = _render(timestamps, gestures)
    trace = SubjectTrace(
        subject_id=profile.subject_id,
        timestamps=timestamps,
        au_ids=au_ids,
        intensities=intensities,
        frame_valid=np.ones(n_frames, dtype=bool),
    )
    log_debug(
        "subject_synthesized",
        subject_id=profile.subject_id,
        frames=n_frames,
        gestures=len(gestures),
        flinches=len(flinches),
    )
    return trace, GroundTruth(subject_id=profile.subject_id, gestures=tuple(gestures))


@dataclass(frozen=True)
class CohortConfig:
    subjects: int = 20
    fps: float = DEFAULT_FPS
    length_s: float = DEFAULT_LENGTH_S
    stimuli: int = 3
    time_jitter: tuple[float, float] = (0.0, 0.0)
    intensity_jitter: tuple[float, float] = (0.0, 0.0)
    distractor_count: int = DEFAULT_DISTRACTORS
    shared_template: bool = False
    avoid_response_windows: bool = True
    flinch_count: int = 0

    def __post_init__(self) -> None:
        if self.subjects < 1:
            raise ValueError("subjects must be >= 1")
        if self.stimuli < 1:
            raise ValueError("stimuli must be >= 1")
        for name in ("time_jitter", "intensity_jitter"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi < lo:
                raise ValueError(f"{name} must be a range 0 <= lo <= hi, got {(lo, hi)}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "subjects": self.subjects,
            "fps": self.fps,
            "length_s": self.length_s,
            "stimuli": self.stimuli,
            "time_jitter": list(self.time_jitter),
            "intensity_jitter": list(self.intensity_jitter),
            "distractor_count": self.distractor_count,
            "shared_template": self.shared_template,
            "avoid_response_windows": self.avoid_response_windows,
            "flinch_count": self.flinch_count,
        }


@dataclass(frozen=True)
class SyntheticSubject:
    profile: SubjectProfile
    schedule: StimulusSchedule
    trace: SubjectTrace
    truth: GroundTruth


@dataclass(frozen=True)
class SyntheticCohort:
    config: CohortConfig
    master_seed: int
    subjects: tuple[SyntheticSubject, ...] = field(default_factory=tuple)

    def schedules(self) -> dict[str, StimulusSchedule]:
        return {s.profile.subject_id: s.schedule for s in self.subjects}

    def ground_truth_dict(self) -> dict[str, Any]:
        return {
            "schema_version": 1,
            "master_seed": self.master_seed,
            "config": self.config.to_dict(),
            "subjects": [
                {
                    "subject_id": s.profile.subject_id,
                    "seed": s.profile.seed,
                    "time_jitter": s.profile.time_jitter,
                    "intensity_jitter": s.profile.intensity_jitter,
                    "stimulus_times": list(s.schedule.stimulus_times),
                    "response_template": [p.to_dict() for p in s.profile.response_template],
                    "gestures": [g.to_dict() for g in s.truth.gestures],
                }
                for s in self.subjects
            ],
        }


def subject_ids(count: int) -> list[str]:
    width = max(2, len(str(count)))
    return [f"S{number:0{width}d}" for number in range(1, count + 1)]


def _stimulus_times(rng: np.random.Generator, config: CohortConfig) -> tuple[float, ...]:
    # Stimuli fall inside the first 70% of the trace, snapped to the frame grid.
    length = config.length_s
    first = rng.uniform(0.1 * length, 0.2 * length)
    step = length / max(1, config.stimuli - 1)
    gaps = rng.uniform(0.3 * step, 0.5 * step, size=config.stimuli - 1)
    times = first + np.concatenate(([0.0], np.cumsum(gaps)))
    return tuple(float(np.round(t * config.fps) / config.fps) for t in times)


def _build_subject(
    config: CohortConfig,
    master_seed: int,
    index: int,
    subject_id: str,
    shared: tuple[TemplatePulse, ...] | None,
) -> SyntheticSubject:
    subject_seed = derive_seed(master_seed, index)
    rng = np.random.default_rng(derive_seed(subject_seed, _PROFILE_STREAM))
    template = random_template(rng)
    if shared is not None:
        template = shared
    profile = SubjectProfile(
        subject_id=subject_id,
        response_template=template,
        time_jitter=float(rng.uniform(*config.time_jitter)),
        intensity_jitter=float(rng.uniform(*config.intensity_jitter)),
        distractor_count=config.distractor_count,
        seed=derive_seed(subject_seed, _TRACE_STREAM),
        avoid_response_windows=config.avoid_response_windows,
        flinch_count=config.flinch_count,
    )
    schedule = StimulusSchedule(subject_id=subject_id, stimulus_times=_stimulus_times(rng, config))
    trace, truth = generate_subject_trace(profile, schedule, fps=config.fps, length=config.length_s)
    return SyntheticSubject(profile=profile, schedule=schedule, trace=trace, truth=truth)


def generate_cohort(config: CohortConfig, master_seed: int, *, threads: int = 1) -> SyntheticCohort:
    """Generate every subject; output does not depend on `threads`."""
    shared = None
    if config.shared_template:
        shared = random_template(np.random.default_rng(derive_seed(master_seed, config.subjects + 1)))
    ids = subject_ids(config.subjects)

    def build(index: int) -> SyntheticSubject:
        return _build_subject(config, master_seed, index, ids[index], shared)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            subjects = tuple(pool.map(build, range(config.subjects)))
    else:
        subjects = tuple(build(index) for index in range(config.subjects))

    log_info("cohort_synthesized", subjects=len(subjects), master_seed=master_seed)
    return SyntheticCohort(config=config, master_seed=master_seed, subjects=subjects)
