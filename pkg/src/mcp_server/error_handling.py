from __future__ import annotations

from functools import wraps
from typing import Any, Callable, TypeVar

from domain.errors import AppError, InvalidConfig, NoParseableSubjects, ReportIoError
from logging_utils import log_error, log_warning, run_context

F = TypeVar("F", bound=Callable[..., Any])


def handle_mcp_errors(func: F) -> F:
    @wraps(func)
    def wrapper(*args, **kwargs):
        with run_context():
            try:
                return func(*args, **kwargs)
            except InvalidConfig as exc:
                log_warning("invalid_config", error=str(exc))
                raise ValueError(f"ERR_INVALID_CONFIG: {exc}") from exc
            except NoParseableSubjects as exc:
                log_warning("no_parseable_subjects", error=str(exc))
                raise ValueError(f"ERR_NO_PARSEABLE_SUBJECTS: {exc}") from exc
            except ReportIoError as exc:
                log_error("report_io_failed", error=str(exc))
                raise RuntimeError("ERR_REPORT_IO: Could not write output. Check server logs for details.") from exc
            except AppError as exc:
                log_warning("request_failed", error=exc.code, detail=str(exc))
                raise ValueError(f"ERR_{exc.code}: {exc}") from exc
            except FileNotFoundError as exc:
                log_warning("not_found", error=str(exc))
                raise ValueError(f"ERR_NOT_FOUND: {exc}") from exc

    return wrapper  # type: ignore[return-value]
