"""Evaluation report rendering: versioned JSON and the one-row-per-mode CSV summary."""

from __future__ import annotations

import math
from typing import Any

import pandas as pd

from adapters.report_json_repo import dumps_report
from services.pipeline_service import EvaluationRun

SCHEMA_VERSION = 1
TOOL_NAME = "gesture-forge"
SUMMARY_COLUMNS = ["mode", "top2_pct", "top10_pct", "top15pct_pct", "median_rank", "included", "excluded"]
REPORT_FORMATS = ("json", "csv")


def build_report(run: EvaluationRun) -> dict[str, Any]:
    """Plain-dict report; key order is fixed so serialization is byte-stable."""
    excluded = sorted(
        {result.subject_id for outcome in run.outcomes for result in outcome.results if result.excluded}
    )
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": TOOL_NAME,
        "status": "ok" if run.exit_code == 0 else "partial",
        "config": run.config_echo,
        "summary": {
            "subjects_total": run.subjects_total,
            "failed": len(run.failures),
            "excluded": len(excluded),
            "excluded_subjects": excluded,
        },
        "modes": [
            {
                "mode": outcome.mode.value,
                "metrics": outcome.metrics.to_dict() if outcome.metrics else None,
                "subjects": [result.to_dict() for result in outcome.results],
            }
            for outcome in run.outcomes
        ],
        "alignments": [
            {
                "subject_id": alignment.subject_id,
                "stimulus_times": list(alignment.stimulus_times),
                "matches": list(alignment.matches),
                "excluded": alignment.excluded,
                "reason": alignment.reason,
            }
            for alignment in run.alignments
        ],
        "failures": [failure.to_dict() for failure in run.failures],
    }


def _whole_pct(value: float) -> str:
    # Display rounding, halves up.
    return str(int(math.floor(value + 0.5)))


def summary_rows(run: EvaluationRun) -> list[dict[str, str]]:
    rows = []
    for outcome in run.outcomes:
        metrics = outcome.metrics
        if metrics is None:
            excluded = sum(1 for result in outcome.results if result.excluded)
            rows.append(
                {
                    "mode": outcome.mode.value,
                    "top2_pct": "",
                    "top10_pct": "",
                    "top15pct_pct": "",
                    "median_rank": "",
                    "included": "0",
                    "excluded": str(excluded),
                }
            )
            continue
        rows.append(
            {
                "mode": outcome.mode.value,
                "top2_pct": _whole_pct(metrics.top2_pct),
                "top10_pct": _whole_pct(metrics.top10_pct),
                "top15pct_pct": _whole_pct(metrics.top15pct_pct),
                "median_rank": f"{metrics.median_rank:g}",
                "included": str(metrics.included_subjects),
                "excluded": str(metrics.excluded_subjects),
            }
        )
    return rows


def emit_report(run: EvaluationRun, fmt: str = "json") -> bytes:
    if fmt == "json":
        return dumps_report(build_report(run))
    if fmt == "csv":
        frame = pd.DataFrame(summary_rows(run), columns=SUMMARY_COLUMNS, dtype=str)
        return frame.to_csv(index=False, lineterminator="\n").encode("utf-8")
    raise ValueError(f"unknown report format {fmt!r}; expected one of {', '.join(REPORT_FORMATS)}")
