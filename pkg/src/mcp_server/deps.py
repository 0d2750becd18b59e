from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from adapters.filesystem_store import DatasetStore, resolve_under
from adapters.report_json_repo import ReportRepository
from config import AppConfig, RunConfig
from services.pipeline_service import PipelineService


@dataclass(frozen=True)
class Services:
    config: AppConfig
    reports: ReportRepository

    def resolve(self, relpath: str) -> Path:
        return resolve_under(self.config.data_dir, relpath)

    def pipeline(self, traces_relpath: str, run_config: RunConfig) -> PipelineService:
        return PipelineService(DatasetStore(self.resolve(traces_relpath)), run_config, self.reports)


_services: Services | None = None


def build_services(config: AppConfig | None = None) -> Services:
    if config is None:
        config = AppConfig.from_env()
    return Services(config=config, reports=ReportRepository(use_lock=True))


def get_services() -> Services:
    global _services
    if _services is None:
        _services = build_services()
    return _services


def set_services(services: Services | None) -> None:
    global _services
    _services = services
