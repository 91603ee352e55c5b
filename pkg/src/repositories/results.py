from __future__ import annotations

import json
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel

from src.core.params import BS_TIERS, LinkClass, Subframe, Tier
from src.core.results import (
    AssociationBatch,
    EmpiricalCdf,
    EndpointCheck,
    IcicComparison,
    KpiReport,
    NetworkLayout,
    SearchResult,
    StateEvaluation,
    SurfacePoint,
)
from src.utils.units import linear_to_db


logger = structlog.get_logger(__name__)

_STATE_COLUMNS = (
    "alpha_mbs",
    "alpha_pbs",
    "beta_mbs",
    "beta_pbs",
    "rho_mbs",
    "rho_pbs",
    "rho_uabs",
    "tau_pbs",
    "tau_uabs",
)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def _jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, float)):
        return float(value) if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def report_payload(report: KpiReport) -> dict[str, Any]:
    return {
        "kpis": {
            "fifth_percentile_se": report.fifth_percentile_se,
            "coverage_probability": report.coverage_probability,
        },
        "trials": report.trials,
        "threshold_se": report.threshold_se,
        "seed": report.seed,
        "state": report.state,
        "icic_mode": report.state.icic_mode,
        "records": [
            {
                "trial": r.trial,
                "fifth_percentile_se": r.fifth_percentile_se,
                "coverage_probability": r.coverage_probability,
                "scheduled_ues": int(r.per_ue_se.size),
                "scene_fingerprint": r.scene_fingerprint,
            }
            for r in report.records
        ],
    }


def _evaluation_payload(evaluation: StateEvaluation) -> dict[str, Any]:
    return {
        "index": evaluation.index,
        "state": evaluation.state,
        "fifth_percentile_se": evaluation.fifth_percentile_se,
        "coverage_probability": evaluation.coverage_probability,
        "value": evaluation.value,
    }


def search_payload(result: SearchResult) -> dict[str, Any]:
    """Best state with both KPIs reported; the full trace goes to the trace CSV."""
    return {
        "objective": result.objective,
        "evaluated": result.evaluated,
        "best_index": result.best_index,
        "best_value": result.best_value,
        "best": _evaluation_payload(result.best),
    }


def comparison_payload(comparison: IcicComparison) -> dict[str, Any]:
    return {
        "modes": {name: asdict(outcome) for name, outcome in comparison.outcomes.items()},
        "improvements_percent": comparison.improvements,
    }


def endpoint_payload(checks: Sequence[EndpointCheck]) -> dict[str, Any]:
    return {
        check.link_class.value: {
            "endpoint_db": check.endpoint_db,
            "expected_db": check.expected_db,
            "tolerance_db": check.tolerance_db,
            "within": check.within,
            "informative": check.informative,
        }
        for check in checks
    }


class ResultRepository:
    """Writes result documents and plot-data tables.

    Every JSON document embeds the effective configuration and a `generated_at`
    timestamp; everything else in it is a pure function of the run, so two identical
    runs differ only in that field.
    """

    def __init__(
        self,
        effective_config: Mapping[str, Any],
        *,
        app_version: str = "0.1.0",
        clock: Callable[[], str] = _utc_now,
    ):
        self.effective_config = dict(effective_config)
        self.app_version = app_version
        self.clock = clock

    def _prepare(self, path: str | Path) -> Path:
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        return target

    def write_json(self, path: str | Path, kind: str, body: Mapping[str, Any]) -> Path:
        document = {
            "kind": kind,
            "app_version": self.app_version,
            "generated_at": self.clock(),
            "effective_config": self.effective_config,
            **_jsonable(body),
        }
        target = self._prepare(path)
        target.write_text(
            json.dumps(document, sort_keys=True, indent=2, allow_nan=False) + "\n",
            encoding="utf-8",
        )
        logger.info("result_written", path=str(target), kind=kind)
        return target

    def write_csv(self, path: str | Path, frame: pd.DataFrame, kind: str) -> Path:
        target = self._prepare(path)
        frame.to_csv(target, index=False, float_format="%.10g")
        logger.info("result_written", path=str(target), kind=kind, rows=len(frame))
        return target

    def write_report(self, path: str | Path, report: KpiReport) -> Path:
        return self.write_json(path, "simulate", report_payload(report))

    def write_search(self, path: str | Path, result: SearchResult) -> Path:
        return self.write_json(path, "optimize", search_payload(result))

    def write_comparison(self, path: str | Path, comparison: IcicComparison) -> Path:
        return self.write_json(path, "compare", comparison_payload(comparison))

    def write_surface_report(
        self, path: str | Path, points: Sequence[SurfacePoint], result: SearchResult
    ) -> Path:
        return self.write_json(
            path,
            "surface",
            {"points": [asdict(p) for p in points], **search_payload(result)},
        )

    def write_cdf_report(self, path: str | Path, checks: Sequence[EndpointCheck]) -> Path:
        return self.write_json(path, "plcdf", {"endpoints": endpoint_payload(checks)})

    def write_layout_csv(self, path: str | Path, layout: NetworkLayout) -> Path:
        frames = [
            pd.DataFrame(
                {
                    "tier": tier.value,
                    "x_m": layout.positions(tier)[:, 0],
                    "y_m": layout.positions(tier)[:, 1],
                    "z_m": layout.positions(tier)[:, 2],
                }
            )
            for tier in Tier
        ]
        return self.write_csv(path, pd.concat(frames, ignore_index=True), "layout")

    def write_cdf_csv(self, path: str | Path, cdfs: Mapping[LinkClass, EmpiricalCdf]) -> Path:
        frame = pd.concat(
            [
                pd.DataFrame(
                    {"link_class": cdf.link_class.value, "pl_db": cdf.values_db, "cdf": cdf.probabilities}
                )
                for cdf in cdfs.values()
            ],
            ignore_index=True,
        )
        return self.write_csv(path, frame, "cdf")

    def write_assignments_csv(self, path: str | Path, batch: AssociationBatch) -> Path:
        rows = np.arange(len(batch))
        usf = batch.sir.usf_matrix()[rows, batch.serving_tier]
        csf = batch.sir.csf_matrix()[rows, batch.serving_tier]
        frame = pd.DataFrame(
            {
                "ue": rows,
                "tier": [BS_TIERS[int(code)].value for code in batch.serving_tier],
                "cell": batch.serving_cell,
                "subframe": np.where(batch.csf, Subframe.CSF.value, Subframe.USF.value),
                "sir_db": linear_to_db(np.where(batch.csf, csf, usf)),
            }
        )
        return self.write_csv(path, frame, "assignments")

    def write_flat_csv(self, path: str | Path, report: KpiReport) -> Path:
        rows = []
        for record in report.records:
            rows.append((record.trial, "fifth_percentile_se", record.fifth_percentile_se))
            rows.append((record.trial, "coverage_probability", record.coverage_probability))
        frame = pd.DataFrame(rows, columns=["trial", "kpi", "value"])
        return self.write_csv(path, frame, "flat")

    def write_trace_csv(self, path: str | Path, result: SearchResult) -> Path:
        frame = pd.DataFrame(
            [
                {
                    "index": e.index,
                    **{name: getattr(e.state, name) for name in _STATE_COLUMNS},
                    "fifth_percentile_se": e.fifth_percentile_se,
                    "coverage_probability": e.coverage_probability,
                    "value": e.value,
                }
                for e in result.trace
            ]
        )
        return self.write_csv(path, frame, "trace")

    def write_surface_csv(self, path: str | Path, points: Sequence[SurfacePoint]) -> Path:
        frame = pd.DataFrame(
            [asdict(p) for p in points], columns=["tau_pbs", "tau_uabs", "coverage", "fivepse"]
        )
        return self.write_csv(path, frame, "surface")
