from __future__ import annotations

import re
from dataclasses import dataclass

from domain.errors import InvalidSubjectId

_ID_RE = re.compile(r"^[A-Za-z0-9_-]{1,64}$")
_AU_RE = re.compile(r"^AU(\d{2})$")

# Canonical order: ascending numeric AU id. Feature vectors use this order.
AU_VOCABULARY: tuple[str, ...] = (
    "AU01",
    "AU02",
    "AU04",
    "AU05",
    "AU06",
    "AU07",
    "AU09",
    "AU10",
    "AU12",
    "AU14",
    "AU15",
    "AU17",
    "AU20",
    "AU23",
    "AU25",
    "AU26",
    "AU45",
)
AU_INDEX: dict[str, int] = {au: i for i, au in enumerate(AU_VOCABULARY)}

INTENSITY_MIN = 0.0
INTENSITY_MAX = 5.0


def _validate_id(value: str, name: str) -> str:
    if not value or not _ID_RE.match(value):
        if name == "subject_id":
            raise InvalidSubjectId("subject_id must be 1-64 chars of letters, numbers, '-' or '_'")
        raise ValueError(f"{name} must be 1-64 chars of letters, numbers, '-' or '_'")
    return value


@dataclass(frozen=True, order=True)
class SubjectId:
    value: str

    def __post_init__(self) -> None:
        _validate_id(self.value, "subject_id")

    def __str__(self) -> str:
        return self.value


def coerce_subject_id(subject_id: SubjectId | str) -> SubjectId:
    if isinstance(subject_id, SubjectId):
        return subject_id
    return SubjectId(str(subject_id))


def is_known_au(au_id: str) -> bool:
    return au_id in AU_INDEX


def au_number(au_id: str) -> int:
    match = _AU_RE.match(au_id)
    if not match:
        raise ValueError(f"not an AU id: {au_id!r}")
    return int(match.group(1))


def canonical_au_order(au_ids) -> list[str]:
    return sorted(au_ids, key=au_number)
