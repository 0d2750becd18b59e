from __future__ import annotations

import json
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Mapping

from domain.errors import ReportIoError


def dumps_report(payload: Mapping[str, Any]) -> bytes:
    """Indented JSON in the payload's own key order, newline-terminated."""
    return (json.dumps(payload, ensure_ascii=False, indent=2) + "\n").encode("utf-8")


class ReportRepository:
    """Atomic writer for reports and stage dumps (temp file + fsync + rename)."""

    def __init__(self, *, use_lock: bool = False) -> None:
        self._use_lock = use_lock

    def write_json(self, path: Path | str, payload: Mapping[str, Any]) -> Path:
        return self.write_bytes(path, dumps_report(payload))

    def write_bytes(self, path: Path | str, data: bytes) -> Path:
        target = Path(path)
        tmp_path = target.with_name(f"{target.name}.tmp")
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with self._locked_file(target):
                with tmp_path.open("wb") as handle:
                    handle.write(data)
                    handle.flush()
                    os.fsync(handle.fileno())
                os.replace(tmp_path, target)
        except OSError as exc:
            try:
                tmp_path.unlink()
            except OSError:
                pass
            raise ReportIoError(f"cannot write {target}: {exc}") from exc
        return target

    def read_json(self, path: Path | str) -> dict[str, Any]:
        target = Path(path)
        try:
            data = json.loads(target.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ReportIoError(f"cannot read {target}: {exc}") from exc
        if not isinstance(data, dict):
            raise ReportIoError(f"{target} does not hold a JSON object")
        return data

    @contextmanager
    def _locked_file(self, path: Path):
        if not self._use_lock:
            yield None
            return
        try:
            import fcntl
        except ImportError:
            yield None
            return

        lock_path = path.with_name(f"{path.name}.lock")
        with lock_path.open("a+", encoding="utf-8") as handle:
            fcntl.flock(handle.fileno(), fcntl.LOCK_EX)
            try:
                yield handle
            finally:
                fcntl.flock(handle.fileno(), fcntl.LOCK_UN)
