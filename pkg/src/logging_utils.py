from __future__ import annotations

import contextlib
import logging
import sys
import uuid
from contextvars import ContextVar
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

_logger = logging.getLogger("gesture_forge")
CONSOLE_HANDLER_NAME = "gesture_forge.console"
_run_id: ContextVar[str | None] = ContextVar("run_id", default=None)
_subject_id: ContextVar[str | None] = ContextVar("subject_id", default=None)


def get_run_id() -> str | None:
    return _run_id.get()


@contextlib.contextmanager
def run_context(run_id: str | None = None):
    if run_id is None:
        run_id = get_run_id() or uuid.uuid4().hex[:12]
    token = _run_id.set(run_id)
    try:
        yield run_id
    finally:
        _run_id.reset(token)


@contextlib.contextmanager
def subject_context(subject_id: str):
    token = _subject_id.set(subject_id)
    try:
        yield subject_id
    finally:
        _subject_id.reset(token)


def _log(level: int, event: str, **fields: Any) -> None:
    if not _logger.isEnabledFor(level):
        return
    context = {"subject_id": _subject_id.get(), "run_id": get_run_id()}
    for key, value in context.items():
        if fields.get(key) is None and value is not None:
            fields[key] = value
    parts = " ".join(f"{key}={value}" for key, value in fields.items() if value is not None)
    if parts:
        _logger.log(level, "%s %s", event, parts)
    else:
        _logger.log(level, "%s", event)


def log_debug(event: str, **fields: Any) -> None:
    _log(logging.DEBUG, event, **fields)


def log_info(event: str, **fields: Any) -> None:
    _log(logging.INFO, event, **fields)


def log_warning(event: str, **fields: Any) -> None:
    _log(logging.WARNING, event, **fields)


def log_error(event: str, **fields: Any) -> None:
    _log(logging.ERROR, event, **fields)


def _archive(log_path: Path) -> None:
    """Rename an earlier run's log to `<stem>-<UTC timestamp>[-n]<suffix>`."""
    timestamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    stem = log_path.stem or log_path.name
    candidate = log_path.with_name(f"{stem}-{timestamp}{log_path.suffix}")
    counter = 1
    while candidate.exists():
        candidate = log_path.with_name(f"{stem}-{timestamp}-{counter}{log_path.suffix}")
        counter += 1
    try:
        log_path.rename(candidate)
    except OSError as exc:
        log_warning("log_archive_failed", path=str(log_path), archive=str(candidate), error=str(exc))


def configure_file_logging(log_dir: Path, filename: str = "logs.txt") -> Path | None:
    try:
        log_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        log_warning("log_dir_unavailable", dir=str(log_dir), error=str(exc))
        return None

    log_path = (log_dir / filename).resolve()
    if any(getattr(h, "baseFilename", None) == str(log_path) for h in _logger.handlers):
        return log_path
    if log_path.exists():
        _archive(log_path)

    handler = logging.FileHandler(log_path, encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    _logger.addHandler(handler)
    return log_path


def configure_console_logging(level: str | int = "INFO") -> None:
    """Point the console handler at the current sys.stderr, replacing any earlier one."""
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO
    _logger.setLevel(level)
    for existing in [h for h in _logger.handlers if h.get_name() == CONSOLE_HANDLER_NAME]:
        # The old stream may already be closed; removing never flushes it.
        _logger.removeHandler(existing)
    handler = logging.StreamHandler(sys.stderr)
    handler.set_name(CONSOLE_HANDLER_NAME)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(levelname)s %(message)s"))
    _logger.addHandler(handler)
