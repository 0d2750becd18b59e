import numpy as np
import pytest

from adapters.csv_codec import (
    EVENT_COLUMNS,
    events_to_csv,
    parse_au_csv,
    parse_stimulus_schedule,
    serialize_schedule_csv,
    serialize_trace_csv,
)
from domain.errors import (
    DuplicateStimulusIndex,
    MalformedRow,
    MissingColumn,
    NonIncreasingTimes,
    NonMonotonicTimestamps,
)
from domain.models import StimulusSchedule

OPENFACE_SAMPLE = (
    b"frame, face_id, timestamp, confidence, success, AU01_r, AU12_r, AU12_c, AU03_r\n"
    b"1, 0, 0.000, 0.98, 1, 0.10, 1.50, 1, 9\n"
    b"2, 0, 0.033, 0.60, 1, 0.20, 1.60, 1, 9\n"
    b"3, 0, 0.067, 0.97, 0, 0.30, 1.70, 1, 9\n"
    b"4, 0, 0.100, 0.99, 1, 0.40, 1.80, 1, 9\n"
)


def test_parse_openface_columns():
    trace = parse_au_csv(OPENFACE_SAMPLE, subject_id="S01")

    assert trace.subject_id == "S01"
    assert trace.au_ids == ("AU01", "AU12")
    assert trace.n_frames == 4
    assert np.allclose(trace.channel("AU12"), [1.5, 1.6, 1.7, 1.8])
    # Low confidence and failed tracking both invalidate a frame.
    assert trace.frame_valid.tolist() == [True, False, False, True]


def test_confidence_floor_is_configurable():
    trace = parse_au_csv(OPENFACE_SAMPLE, subject_id="S01", confidence_floor=0.5)
    assert trace.frame_valid.tolist() == [True, True, False, True]


def test_missing_confidence_columns_mean_valid():
    trace = parse_au_csv(b"timestamp,AU06_r\n0.0,1.0\n0.1,2.0\n", subject_id="S02")
    assert trace.frame_valid.all()


def test_header_only_gives_zero_frames():
    trace = parse_au_csv(b"timestamp,AU06_r\n", subject_id="S02")
    assert trace.n_frames == 0


@pytest.mark.parametrize(
    "payload",
    [b"", b"frame,AU06_r\n1,0.5\n", b"timestamp,confidence\n0.0,1.0\n"],
)
def test_missing_columns(payload):
    with pytest.raises(MissingColumn):
        parse_au_csv(payload, subject_id="S01")


def test_non_monotonic_timestamps():
    payload = b"timestamp,AU06_r\n0.0,1.0\n0.1,1.0\n0.1,1.0\n"
    with pytest.raises(NonMonotonicTimestamps, match="line 4"):
        parse_au_csv(payload, subject_id="S01")


def test_malformed_value_reports_line():
    payload = b"timestamp,AU06_r\n0.0,1.0\n0.1,abc\n"
    with pytest.raises(MalformedRow) as exc:
        parse_au_csv(payload, subject_id="S01")
    assert exc.value.line == 3


def test_trace_csv_round_trip_is_exact(make_trace):
    trace = make_trace(
        {"AU04": np.array([0.0, 1.0 / 3.0, 2.5, 4.999999]), "AU45": np.array([0.1, 0.2, 0.3, 0.7])},
        valid=np.array([True, False, True, True]),
    )
    parsed = parse_au_csv(serialize_trace_csv(trace), subject_id=trace.subject_id)
    assert parsed.same_as(trace)


def test_au_column_order_does_not_matter():
    swapped = (
        b"timestamp, AU12_c, AU12_r, success, AU03_r, confidence, AU01_r\n"
        b"0.000, 1, 1.50, 1, 9, 0.98, 0.10\n"
        b"0.033, 1, 1.60, 1, 9, 0.60, 0.20\n"
        b"0.067, 1, 1.70, 0, 9, 0.97, 0.30\n"
        b"0.100, 1, 1.80, 1, 9, 0.99, 0.40\n"
    )
    assert parse_au_csv(swapped, subject_id="S01").same_as(parse_au_csv(OPENFACE_SAMPLE, subject_id="S01"))


def test_crlf_line_endings_parse():
    trace = parse_au_csv(OPENFACE_SAMPLE.replace(b"\n", b"\r\n"), subject_id="S01")
    assert trace.same_as(parse_au_csv(OPENFACE_SAMPLE, subject_id="S01"))

    schedules = parse_stimulus_schedule(b"subject_id,stimulus_index,time_s\r\nS01,1,10\r\nS01,2,20.5\r\n")
    assert schedules == {"S01": StimulusSchedule("S01", (10.0, 20.5))}


def test_parse_schedule_sorts_by_index():
    payload = b"subject_id,stimulus_index,time_s\nS02,2,40.5\nS01,1,10\nS02,1,12.25\nS01,2,20\n"
    schedules = parse_stimulus_schedule(payload)

    assert list(schedules) == ["S01", "S02"]
    assert schedules["S02"].stimulus_times == (12.25, 40.5)


def test_schedule_duplicate_index():
    payload = b"subject_id,stimulus_index,time_s\nS01,1,10\nS01,1,20\n"
    with pytest.raises(DuplicateStimulusIndex):
        parse_stimulus_schedule(payload)


def test_schedule_times_must_increase():
    payload = b"subject_id,stimulus_index,time_s\nS01,1,30\nS01,2,20\n"
    with pytest.raises(NonIncreasingTimes):
        parse_stimulus_schedule(payload)


def test_schedule_bad_index_and_missing_column():
    with pytest.raises(MalformedRow):
        parse_stimulus_schedule(b"subject_id,stimulus_index,time_s\nS01,0,10\n")
    with pytest.raises(MissingColumn):
        parse_stimulus_schedule(b"subject_id,time_s\nS01,10\n")


def test_schedule_serialization_reads_back():
    schedules = {
        "S01": StimulusSchedule("S01", (10.0, 25.5, 61.0)),
        "S02": StimulusSchedule("S02", (5.0, 9.0, 13.0)),
    }
    assert parse_stimulus_schedule(serialize_schedule_csv(schedules)) == schedules


def test_events_dump_header(make_event):
    data = events_to_csv([("S01", make_event(1.0)), ("S01", make_event(4.0, au_id="AU06"))])
    lines = data.decode("utf-8").splitlines()

    assert lines[0].split(",") == EVENT_COLUMNS
    assert len(lines) == 3
    assert lines[2].startswith("S01,AU06,4.0,")
