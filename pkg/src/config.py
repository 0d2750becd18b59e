from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping

from domain.errors import InvalidConfig
from domain.models import DetectionParams, Mode, SiStrategy

THREADS_ENV = "GESTURE_FORGE_THREADS"


def _parse_int(raw: str, name: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise InvalidConfig(f"{name} must be an integer, got {raw!r}") from exc


@dataclass(frozen=True)
class AppConfig:
    threads: int
    log_dir: Path | None
    log_level: str
    data_dir: Path

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None) -> "AppConfig":
        if env is None:
            env = os.environ

        log_dir_raw = env.get("GESTURE_FORGE_LOG_DIR", "")
        return cls(
            threads=_parse_int(env.get(THREADS_ENV, "1"), THREADS_ENV),
            log_dir=Path(log_dir_raw) if log_dir_raw else None,
            log_level=env.get("GESTURE_FORGE_LOG_LEVEL", "INFO"),
            data_dir=Path(env.get("GESTURE_FORGE_DATA_DIR", "/data")),
        )


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_preference(raw: str) -> float | None:
    value = raw.strip().lower()
    if value in ("", "median", "none"):
        return None
    return float(value)


def _parse_topk(raw: str) -> tuple[int, ...]:
    return tuple(int(part) for part in raw.replace(" ", "").split(",") if part)


def _parse_path(raw: str) -> Path | None:
    return Path(raw) if raw.strip() else None


_PARSERS: dict[str, Callable[[str], Any]] = {
    "traces_dir": _parse_path,
    "schedule_path": _parse_path,
    "output_dir": _parse_path,
    "report_out": _parse_path,
    "summary_out": _parse_path,
    "confidence_floor": float,
    "min_valid_fraction": float,
    "activation_threshold": float,
    "min_duration_frames": int,
    "smoothing_window": int,
    "damping": float,
    "max_iter": int,
    "convergence_iter": int,
    "preference": _parse_preference,
    "refine_exemplars": _parse_bool,
    "mode": lambda raw: raw.strip().lower(),
    "response_window": float,
    "target_stimulus": int,
    "si_strategy": lambda raw: SiStrategy(raw.strip().lower()),
    "topk_list": _parse_topk,
    "seed": int,
    "threads": int,
}

_MODES = {"sd": (Mode.SD,), "si": (Mode.SI,), "both": (Mode.SD, Mode.SI)}

# Paths and worker count never enter a report.
_NOT_ECHOED = {"traces_dir", "schedule_path", "output_dir", "report_out", "summary_out", "threads"}


def read_config_file(path: Path) -> dict[str, str]:
    """Read `key = value` lines; `#` starts a comment."""
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidConfig(f"cannot read config file {path}: {exc}") from exc

    values: dict[str, str] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidConfig(f"{path}:{number}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _PARSERS:
            raise InvalidConfig(f"{path}:{number}: unknown key {key!r}")
        values[key] = value
    return values


def render_config_file(values: Mapping[str, Any], header: str | None = None) -> bytes:
    """The `key = value` text that read_config_file reads back."""
    lines = [f"# {header}"] if header else []
    for key, value in values.items():
        if key not in _PARSERS:
            raise InvalidConfig(f"unknown key {key!r}")
        lines.append(f"{key} = {value}")
    return ("\n".join(lines) + "\n").encode("utf-8")


@dataclass(frozen=True)
class RunConfig:
    traces_dir: Path | None = None
    schedule_path: Path | None = None
    output_dir: Path | None = None
    report_out: Path | None = None
    summary_out: Path | None = None
    confidence_floor: float = 0.75
    min_valid_fraction: float = 0.5
    activation_threshold: float = 0.5
    min_duration_frames: int = 3
    smoothing_window: int = 5
    damping: float = 0.5
    max_iter: int = 200
    convergence_iter: int = 15
    preference: float | None = None
    refine_exemplars: bool = True
    mode: str = "both"
    response_window: float = 2.0
    target_stimulus: int = 3
    si_strategy: SiStrategy = SiStrategy.POOLED_MEAN
    topk_list: tuple[int, ...] = (2, 10)
    seed: int = 42
    threads: int = 1

    @classmethod
    def load(
        cls,
        overrides: Mapping[str, Any] | None = None,
        config_file: Path | None = None,
        env: Mapping[str, str] | None = None,
    ) -> "RunConfig":
        """Precedence: overrides > config file > default; GESTURE_FORGE_THREADS beats the file."""
        if env is None:
            env = os.environ

        values: dict[str, Any] = {}
        if config_file is not None:
            for key, raw in read_config_file(config_file).items():
                values[key] = _coerce(key, raw)

        if env.get(THREADS_ENV):
            values["threads"] = _coerce("threads", env[THREADS_ENV])

        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key not in _PARSERS:
                raise InvalidConfig(f"unknown setting {key!r}")
            values[key] = _coerce(key, value) if isinstance(value, str) else value

        if "topk_list" in values:
            values["topk_list"] = tuple(values["topk_list"])
        return replace(cls(), **values)

    @property
    def modes(self) -> tuple[Mode, ...]:
        return _MODES[self.mode]

    @property
    def detection_params(self) -> DetectionParams:
        return DetectionParams(
            activation_threshold=self.activation_threshold,
            min_duration_frames=self.min_duration_frames,
            smoothing_window=self.smoothing_window,
        )

    def validate(self, *, require_traces: bool = False, require_schedule: bool = False) -> "RunConfig":
        if not 0.0 <= self.confidence_floor <= 1.0:
            raise InvalidConfig("confidence_floor must be in [0, 1]")
        if not 0.0 <= self.min_valid_fraction <= 1.0:
            raise InvalidConfig("min_valid_fraction must be in [0, 1]")
        if not 0.0 < self.activation_threshold <= 5.0:
            raise InvalidConfig("activation_threshold must be in (0, 5]")
        if self.min_duration_frames < 1:
            raise InvalidConfig("min_duration_frames must be >= 1")
        if self.smoothing_window < 1 or self.smoothing_window % 2 == 0:
            raise InvalidConfig("smoothing_window must be an odd integer >= 1")
        if not 0.5 <= self.damping < 1.0:
            raise InvalidConfig("damping must be in [0.5, 1)")
        if self.max_iter < 1 or self.convergence_iter < 1:
            raise InvalidConfig("max_iter and convergence_iter must be >= 1")
        if self.mode not in _MODES:
            raise InvalidConfig("mode must be one of: sd, si, both")
        if self.response_window <= 0:
            raise InvalidConfig("response_window must be > 0")
        if self.target_stimulus < 2:
            raise InvalidConfig("target_stimulus must be >= 2")
        if not self.topk_list or any(k < 1 for k in self.topk_list):
            raise InvalidConfig("topk_list must hold positive integers")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        if require_traces and (self.traces_dir is None or not self.traces_dir.is_dir()):
            raise InvalidConfig(f"trace directory not found: {self.traces_dir}")
        if require_schedule and (self.schedule_path is None or not self.schedule_path.is_file()):
            raise InvalidConfig(f"schedule file not found: {self.schedule_path}")
        return self

    def echo(self) -> dict[str, Any]:
        payload: dict[str, Any] = {}
        for item in fields(self):
            if item.name in _NOT_ECHOED:
                continue
            value = getattr(self, item.name)
            if isinstance(value, SiStrategy):
                value = value.value
            elif isinstance(value, tuple):
                value = list(value)
            payload[item.name] = value
        return payload


def _coerce(key: str, raw: str) -> Any:
    try:
        return _PARSERS[key](raw)
    except (ValueError, TypeError) as exc:
        raise InvalidConfig(f"invalid value for {key}: {raw!r}") from exc
