from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Protocol


class DatasetRepositoryPort(Protocol):
    @property
    def schedule_path(self) -> Path:
        ...

    def list_subjects(self) -> list[str]:
        ...

    def read_trace(self, subject_id: str) -> bytes:
        ...


class ReportSinkPort(Protocol):
    def write_json(self, path: Path | str, payload: Mapping[str, Any]) -> Path:
        ...

    def write_bytes(self, path: Path | str, data: bytes) -> Path:
        ...
