from dataclasses import replace

import numpy as np
import pytest

from domain.errors import EmptyCohort, MismatchedSizes, ScopeMismatch
from domain.models import FEATURE_LENGTH, Clustering, Mode
from services.gestures import assemble_gestures, featurize_all, featurize_gesture, normalize_cohort


def _clustering(exemplar_of):
    return Clustering(
        exemplar_of=tuple(exemplar_of),
        exemplars=tuple(sorted(set(exemplar_of))),
        converged=True,
        iterations_run=1,
        net_similarity=0.0,
    )


@pytest.fixture
def four_events(make_event):
    return [
        make_event(5.0, 5.4, 6.0, au_id="AU06"),
        make_event(5.1, 5.6, 6.2, au_id="AU12"),
        make_event(1.0, 1.2, 1.8, au_id="AU01"),
        make_event(1.1, 1.4, 1.6, au_id="AU02"),
    ]


def test_assemble_partitions_events_ordered_by_start(four_events):
    gestures = assemble_gestures(four_events, _clustering([1, 1, 3, 3]), "S04")

    assert [g.gesture_id for g in gestures] == [0, 1]
    assert [g.exemplar for g in gestures] == [3, 1]
    assert gestures[0].member_aus == ["AU01", "AU02"]
    assert gestures[1].member_aus == ["AU06", "AU12"]
    assert all(g.subject_id == "S04" for g in gestures)

    members = [event for g in gestures for event in g.member_events]
    assert sorted(members, key=lambda e: e.onset_time) == sorted(four_events, key=lambda e: e.onset_time)


def test_assemble_span_and_median_apex(four_events):
    first = assemble_gestures(four_events, _clustering([1, 1, 3, 3]), "S01")[0]

    assert first.start_time == 1.0
    assert first.end_time == 1.8
    assert first.apex_time == pytest.approx(1.3)
    assert first.start_time <= first.apex_time <= first.end_time


def test_assemble_rejects_mismatched_sizes(four_events):
    with pytest.raises(MismatchedSizes):
        assemble_gestures(four_events, _clustering([0, 0, 0]), "S01")


def test_normalize_collects_min_max(make_gesture):
    gesture = make_gesture(0, 2.0)
    later = make_gesture(1, 9.0)
    norm = normalize_cohort([gesture, later], Mode.SD)

    assert norm.scope is Mode.SD
    assert norm.duration_min == norm.duration_max == pytest.approx(1.0)
    assert norm.duration(1.0) == 0.0


def test_normalize_sd_requires_one_subject(make_gesture):
    gestures = [make_gesture(0, 1.0, subject_id="S01"), make_gesture(0, 1.0, subject_id="S02")]

    with pytest.raises(ScopeMismatch):
        normalize_cohort(gestures, Mode.SD)
    assert normalize_cohort(gestures, Mode.SI).scope is Mode.SI


def test_normalize_rejects_empty():
    with pytest.raises(EmptyCohort):
        normalize_cohort([], Mode.SI)


def test_featurize_fills_member_slots_only(make_event):
    events = [
        make_event(1.0, 1.5, 2.0, au_id="AU06", apex_intensity=4.0),
        make_event(1.0, 1.2, 3.0, au_id="AU12", apex_intensity=2.5),
    ]
    gesture = assemble_gestures(events, _clustering([0, 0]), "S01")[0]
    norm = normalize_cohort([gesture], Mode.SD)

    vector = featurize_gesture(gesture, norm)

    assert vector.values.shape == (FEATURE_LENGTH,)
    assert vector.slot("AU06")[:2].tolist() == [1.0, pytest.approx(0.8)]
    assert vector.slot("AU12")[:2].tolist() == [1.0, pytest.approx(0.5)]
    assert vector.slot("AU06")[2] == 0.0
    assert vector.slot("AU12")[2] == 1.0
    assert {i // 5 for i in np.flatnonzero(vector.values)} == {4, 8}
    assert np.all((vector.values >= 0.0) & (vector.values <= 1.0))


def test_featurize_uses_strongest_event_per_au(make_event):
    weak = make_event(1.0, 1.2, 1.4, au_id="AU12", apex_intensity=1.0)
    strong = make_event(1.1, 1.5, 2.0, au_id="AU12", apex_intensity=4.5)
    forward = assemble_gestures([weak, strong], _clustering([0, 0]), "S01")[0]
    backward = assemble_gestures([strong, weak], _clustering([0, 0]), "S01")[0]
    norm = normalize_cohort([forward], Mode.SD)

    vector = featurize_gesture(forward, norm)

    assert vector.slot("AU12")[1] == pytest.approx(0.9)
    assert np.array_equal(vector.values, featurize_gesture(backward, norm).values)


def test_featurize_all_attaches_vectors(make_gesture):
    gestures = [make_gesture(0, 1.0), make_gesture(1, 4.0, au_ids=("AU01", "AU12"))]
    featurized = featurize_all(gestures, normalize_cohort(gestures, Mode.SD))

    assert all(g.features is not None for g in featurized)
    assert gestures[0].features is None
    assert featurized[1].features.slot("AU01")[0] == 1.0


@pytest.fixture
def two_gestures(make_event):
    events = [
        make_event(1.0, 1.5, 2.0, au_id="AU06", apex_intensity=4.0),
        make_event(1.0, 1.2, 3.0, au_id="AU12", apex_intensity=2.5),
        make_event(7.0, 7.6, 8.1, au_id="AU12", apex_intensity=3.0),
    ]
    return events, _clustering([0, 0, 2])


@pytest.mark.parametrize("rate_factor", [0.25, 4.0])
def test_features_do_not_depend_on_time_units(two_gestures, rate_factor):
    events, clustering = two_gestures
    stretched = [
        replace(
            e,
            onset_time=e.onset_time * 4,
            apex_time=e.apex_time * 4,
            offset_time=e.offset_time * 4,
            rise_rate=e.rise_rate * rate_factor,
            fall_rate=e.fall_rate * rate_factor,
        )
        for e in events
    ]
    base = assemble_gestures(events, clustering, "S01")
    scaled = assemble_gestures(stretched, clustering, "S01")

    expected = featurize_all(base, normalize_cohort(base, Mode.SD))
    for a, b in zip(expected, featurize_all(scaled, normalize_cohort(scaled, Mode.SD))):
        np.testing.assert_allclose(a.features.values, b.features.values, atol=1e-12)


def test_features_do_not_depend_on_member_order(two_gestures):
    events, clustering = two_gestures
    gestures = assemble_gestures(events, clustering, "S01")
    reversed_members = [replace(g, member_events=g.member_events[::-1]) for g in gestures]

    norm = normalize_cohort(gestures, Mode.SD)
    assert normalize_cohort(reversed_members, Mode.SD) == norm
    for a, b in zip(gestures, reversed_members):
        assert np.array_equal(featurize_gesture(a, norm).values, featurize_gesture(b, norm).values)


def test_subject_and_pooled_scopes_normalize_differently(make_event):
    s01 = assemble_gestures([make_event(1.0, 1.2, 1.6), make_event(5.0, 5.3, 6.0)], _clustering([0, 1]), "S01")
    s02 = assemble_gestures([make_event(2.0, 3.0, 6.0)], _clustering([0]), "S02")

    sd = featurize_gesture(s01[1], normalize_cohort(s01, Mode.SD))
    si = featurize_gesture(s01[1], normalize_cohort(s01 + s02, Mode.SI))

    assert sd.slot("AU12")[2] == pytest.approx(1.0)
    assert si.slot("AU12")[2] == pytest.approx(0.4 / 3.4)
