import numpy as np
import pytest

from domain.models import (
    FEATURE_LENGTH,
    Clustering,
    FeatureVector,
    GestureLabel,
    GroundTruthGesture,
    GroundTruthPulse,
    MetricsReport,
    Mode,
    NormalizationContext,
    SimilarityMatrix,
    StimulusAlignment,
    SubjectProfile,
    SubjectResult,
    SubjectTrace,
    TemplatePulse,
    feature_names,
)
from domain.types import AU_VOCABULARY, SubjectId, _validate_id, canonical_au_order


def test_subject_id_validation():
    assert str(SubjectId("S_01")) == "S_01"

    with pytest.raises(ValueError):
        SubjectId("")

    with pytest.raises(ValueError):
        SubjectId("bad id")

    with pytest.raises(ValueError):
        SubjectId("x" * 65)


def test_validate_id_unknown_name_raises():
    with pytest.raises(ValueError):
        _validate_id("", "other")


def test_vocabulary_is_canonical():
    assert len(AU_VOCABULARY) == 17
    assert canonical_au_order(["AU45", "AU02", "AU12"]) == ["AU02", "AU12", "AU45"]
    assert list(AU_VOCABULARY) == canonical_au_order(AU_VOCABULARY)


def test_feature_layout():
    names = feature_names()
    assert FEATURE_LENGTH == 85
    assert len(names) == 85
    assert names[:5] == ["AU01_presence", "AU01_apex", "AU01_duration", "AU01_rise", "AU01_fall"]
    assert names[-1] == "AU45_fall"


def test_feature_vector_requires_85_values():
    with pytest.raises(ValueError):
        FeatureVector(values=np.zeros(84))

    vector = FeatureVector.zeros()
    vector.values[FEATURE_LENGTH - 5] = 1.0
    assert vector.slot("AU45")[0] == 1.0


def test_subject_trace_shape_checks():
    with pytest.raises(ValueError, match="shape"):
        SubjectTrace("S01", np.arange(3.0), ("AU01",), np.zeros((3, 2)), np.ones(3, dtype=bool))

    with pytest.raises(ValueError, match="unknown AU"):
        SubjectTrace("S01", np.arange(3.0), ("AU03",), np.zeros((3, 1)), np.ones(3, dtype=bool))

    with pytest.raises(ValueError, match="unique"):
        SubjectTrace("S01", np.arange(3.0), ("AU01", "AU01"), np.zeros((3, 2)), np.ones(3, dtype=bool))


def test_normalization_scales_and_clips():
    norm = NormalizationContext(Mode.SD, 1.0, 3.0, 0.0, 10.0, 2.0, 2.0)

    assert norm.duration(2.0) == 0.5
    assert norm.duration(5.0) == 1.0
    assert norm.duration(0.0) == 0.0
    assert norm.rise(2.5) == 0.25
    # Zero-width range maps to 0.
    assert norm.fall(2.0) == 0.0


def test_similarity_matrix_validation():
    s = np.array([[0.0, -1.0], [-1.0, 0.0]])
    with pytest.raises(ValueError, match="diagonal"):
        SimilarityMatrix(s=s, preference=np.array([-2.0, -2.0]))

    with pytest.raises(ValueError, match="finite"):
        SimilarityMatrix.from_offdiagonal(np.array([[0.0, np.inf], [-1.0, 0.0]]), -1.0)

    matrix = SimilarityMatrix.from_offdiagonal(s, -3.0)
    assert np.array_equal(np.diag(matrix.s), [-3.0, -3.0])
    assert matrix.n == 2


def test_clustering_partition():
    clustering = Clustering(
        exemplar_of=(0, 0, 2, 2, 2),
        exemplars=(0, 2),
        converged=True,
        iterations_run=10,
        net_similarity=-1.0,
    )
    assert clustering.cluster_count == 2
    assert clustering.partition() == frozenset({frozenset({0, 1}), frozenset({2, 3, 4})})


def test_alignment_training_and_target_ids():
    alignment = StimulusAlignment("S01", 2.0, (10.0, 20.0, 30.0), (4, 9, 15))
    assert alignment.training_ids == [4, 9]
    assert alignment.target_id == 15

    later = StimulusAlignment("S01", 2.0, (10.0, 20.0, 30.0, 40.0), (4, 9, 15, 20), target_stimulus=4)
    assert later.training_ids == [4, 9, 15]
    assert later.target_id == 20


def test_excluded_result_payload():
    result = SubjectResult.excluded_result("S02", Mode.SI, "no significant facial response to stimulus 1")
    payload = result.to_dict()

    assert payload["excluded"] is True
    assert payload["rank_of_gamma"] is None
    assert payload["mode"] == "si"
    assert payload["ranking"] == []


def test_metrics_report_keeps_excluded_key():
    report = MetricsReport(Mode.SD, 50.0, 100.0, 50.0, 1.5, 2, 0, 40.0, {10: 100.0, 2: 50.0})
    payload = report.to_dict()

    assert payload["excluded_subjects"] == 0
    assert list(payload["topk_pct"]) == ["2", "10"]


def test_subject_profile_validation():
    pulse = TemplatePulse("AU12", 0.1, 0.4, 0.6, 3.0)

    with pytest.raises(ValueError):
        SubjectProfile("S01", ())
    with pytest.raises(ValueError):
        SubjectProfile("S01", (TemplatePulse("AU03", 0.1, 0.4, 0.6, 3.0),))
    with pytest.raises(ValueError):
        SubjectProfile("S01", (pulse,), time_jitter=-0.1)
    with pytest.raises(ValueError):
        SubjectProfile("S01", (pulse,), distractor_count=-1)


def test_ground_truth_gesture_payload():
    gesture = GroundTruthGesture(
        label=GestureLabel.RESPONSE,
        stimulus_index=2,
        pulses=(
            GroundTruthPulse("AU06", 10.1, 10.5, 11.2, 3.0),
            GroundTruthPulse("AU12", 10.0, 10.4, 11.0, 2.0),
        ),
    )
    payload = gesture.to_dict()

    assert payload["label"] == "response"
    assert payload["stimulus_index"] == 2
    assert payload["member_aus"] == ["AU06", "AU12"]
    assert payload["start_s"] == 10.0
    assert payload["end_s"] == 11.2
