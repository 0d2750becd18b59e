from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from domain.types import coerce_subject_id

TRACES_DIR = "traces"
SCHEDULE_NAME = "schedule.csv"
GROUND_TRUTH_NAME = "ground_truth.json"
RUN_CONFIG_NAME = "run.conf"
TRACE_SUFFIX = ".csv"


def _is_within_root(path: Path, root: Path) -> bool:
    try:
        path.resolve().relative_to(root.resolve())
        return True
    except ValueError:
        return False


def resolve_under(root: Path, relpath: str) -> Path:
    """Resolve a client-supplied relative path, refusing anything that escapes root."""
    if not relpath or relpath.startswith("/") or ".." in relpath.replace("\\", "/").split("/"):
        raise ValueError("relpath must be a safe relative path")
    path = (root / relpath).resolve()
    if not _is_within_root(path, root):
        raise ValueError("relpath resolves outside the data directory")
    return path


@dataclass(frozen=True)
class DatasetStore:
    """A cohort on disk: one AU CSV per subject, plus optional schedule, ground truth and run defaults.

    `root` may be a dataset directory (holding `traces/`) or a bare
    directory of trace CSVs.
    """

    root: Path

    def __init__(self, root: Path | str) -> None:
        object.__setattr__(self, "root", Path(root))

    @property
    def traces_dir(self) -> Path:
        nested = self.root / TRACES_DIR
        return nested if nested.is_dir() else self.root

    @property
    def schedule_path(self) -> Path:
        return self.root / SCHEDULE_NAME

    @property
    def ground_truth_path(self) -> Path:
        return self.root / GROUND_TRUTH_NAME

    @property
    def run_config_path(self) -> Path:
        return self.root / RUN_CONFIG_NAME

    def trace_path(self, subject_id: str) -> Path:
        sid = coerce_subject_id(subject_id)
        return self.traces_dir / f"{sid}{TRACE_SUFFIX}"

    def list_subjects(self) -> list[str]:
        """Stems of every trace CSV, sorted; the schedule file is never a subject."""
        directory = self.traces_dir
        if not directory.is_dir():
            raise FileNotFoundError(f"trace directory not found: {directory}")
        return sorted(
            path.stem
            for path in directory.iterdir()
            if path.is_file() and path.suffix.lower() == TRACE_SUFFIX and path.name != SCHEDULE_NAME
        )

    def read_trace(self, subject_id: str) -> bytes:
        return self.trace_path(subject_id).read_bytes()

    def prepare(self) -> None:
        (self.root / TRACES_DIR).mkdir(parents=True, exist_ok=True)
