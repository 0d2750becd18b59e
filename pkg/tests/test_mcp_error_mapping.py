import pytest

from domain.errors import InvalidConfig, MalformedRow, NoParseableSubjects, ReportIoError
from mcp_server.error_handling import handle_mcp_errors


@handle_mcp_errors
def _raise(exc):
    raise exc


def test_invalid_config_maps_to_value_error():
    with pytest.raises(ValueError) as exc:
        _raise(InvalidConfig("damping must be in [0.5, 1)"))
    assert "ERR_INVALID_CONFIG" in str(exc.value)


def test_no_parseable_subjects_maps_to_value_error():
    with pytest.raises(ValueError) as exc:
        _raise(NoParseableSubjects("no trace files found"))
    assert "ERR_NO_PARSEABLE_SUBJECTS" in str(exc.value)


def test_domain_error_keeps_its_code():
    with pytest.raises(ValueError) as exc:
        _raise(MalformedRow("AU12_r is not a number", line=7))
    assert str(exc.value) == "ERR_MALFORMED_ROW: line 7: AU12_r is not a number"


def test_report_io_maps_to_runtime_error():
    with pytest.raises(RuntimeError) as exc:
        _raise(ReportIoError("disk full"))
    assert "ERR_REPORT_IO" in str(exc.value)
    assert "disk full" not in str(exc.value)


def test_missing_file_maps_to_not_found():
    with pytest.raises(ValueError) as exc:
        _raise(FileNotFoundError("schedule.csv"))
    assert "ERR_NOT_FOUND" in str(exc.value)


def test_successful_call_passes_through():
    @handle_mcp_errors
    def ok(value):
        return value * 2

    assert ok(21) == 42
