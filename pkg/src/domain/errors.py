from __future__ import annotations


class AppError(Exception):
    """Base error for application/domain failures."""

    code = "APP_ERROR"


class InvalidSubjectId(ValueError, AppError):
    code = "INVALID_SUBJECT"


class InvalidConfig(ValueError, AppError):
    code = "INVALID_CONFIG"


# Ingest


class MissingColumn(ValueError, AppError):
    code = "MISSING_COLUMN"


class NonMonotonicTimestamps(ValueError, AppError):
    code = "NON_MONOTONIC_TIMESTAMPS"


class MalformedRow(ValueError, AppError):
    code = "MALFORMED_ROW"

    def __init__(self, message: str, *, line: int | None = None) -> None:
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class TooFewValidFrames(ValueError, AppError):
    code = "TOO_FEW_VALID_FRAMES"


class DuplicateStimulusIndex(ValueError, AppError):
    code = "DUPLICATE_STIMULUS_INDEX"


class NonIncreasingTimes(ValueError, AppError):
    code = "NON_INCREASING_TIMES"


# Event detection


class InvalidWindow(ValueError, AppError):
    code = "INVALID_WINDOW"


class EvenWindow(InvalidWindow):
    code = "EVEN_WINDOW"


class WindowTooLarge(InvalidWindow):
    code = "WINDOW_TOO_LARGE"


# Clustering


class InvalidDamping(ValueError, AppError):
    code = "INVALID_DAMPING"


class EmptyInput(ValueError, AppError):
    code = "EMPTY_INPUT"


class InvalidAssignment(ValueError, AppError):
    code = "INVALID_ASSIGNMENT"


# Gestures


class MismatchedSizes(ValueError, AppError):
    code = "MISMATCHED_SIZES"


class EmptyCohort(ValueError, AppError):
    code = "EMPTY_COHORT"


class ScopeMismatch(ValueError, AppError):
    code = "SCOPE_MISMATCH"


# Prediction


class EmptyList(ValueError, AppError):
    code = "EMPTY_LIST"


class LengthMismatch(ValueError, AppError):
    code = "LENGTH_MISMATCH"


class EmptyCandidates(ValueError, AppError):
    code = "EMPTY_CANDIDATES"


class ExcludedSubject(AppError):
    code = "EXCLUDED_SUBJECT"

    def __init__(self, subject_id: str, reason: str) -> None:
        super().__init__(f"{subject_id}: {reason}")
        self.subject_id = subject_id
        self.reason = reason


class NoIncludedSubjects(ValueError, AppError):
    code = "NO_INCLUDED_SUBJECTS"


class MissingSchedule(LookupError, AppError):
    code = "MISSING_SCHEDULE"


class NoParseableSubjects(RuntimeError, AppError):
    code = "NO_PARSEABLE_SUBJECTS"


# Synthesis and reporting


class ScheduleOverflow(ValueError, AppError):
    code = "SCHEDULE_OVERFLOW"


class ReportIoError(OSError, AppError):
    code = "REPORT_IO"
