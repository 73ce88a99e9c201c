"""
Run reports: manifests, JSON report documents, comparison, series export and
cross-site summaries.

Reports hold everything needed to compare two runs or export their prediction series
without reloading the dataset. Wall-clock timing only enters a manifest on request, so an
equal manifest always yields a byte-identical report.
"""

import json
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from jsonschema import ValidationError, validate

from .const import METRIC_KEYS, TARGET_COLUMN, TIMESTAMP_COLUMN, VERSION
from .exceptions import ComparisonError, DataError, WindowError
from .metrics import MetricStat, summarize

logger = logging.getLogger(__name__)

REPORT_FORMAT = 1
KIND_HURDLE = "hurdle"
KIND_BASELINE = "baseline"
STAMP_FORMAT = "%Y-%m-%dT%H:%M:%SZ"

_NUMBER_OR_NULL = {"type": ["number", "null"]}
_METRIC_STAT = {
    "type": "object",
    "required": ["mean", "sd", "per_fold", "n_missing"],
    "properties": {
        "mean": _NUMBER_OR_NULL,
        "sd": _NUMBER_OR_NULL,
        "per_fold": {"type": "array", "items": _NUMBER_OR_NULL},
        "n_missing": {"type": "integer", "minimum": 0},
    },
}
_METRICS = {
    "type": "object",
    "required": list(METRIC_KEYS),
    "properties": {key: _METRIC_STAT for key in METRIC_KEYS},
    "additionalProperties": False,
}

REPORT_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "raingap run report",
    "type": "object",
    "required": ["format", "kind", "site_id", "manifest", "fold_plan", "metrics", "per_fold", "series"],
    "properties": {
        "format": {"const": REPORT_FORMAT},
        "kind": {"enum": [KIND_HURDLE, KIND_BASELINE]},
        "site_id": {"type": "string"},
        "manifest": {
            "type": "object",
            "required": ["subcommand", "config", "inputs", "seeds", "version"],
            "properties": {
                "subcommand": {"type": "string"},
                "config": {"type": "object"},
                "inputs": {"type": "object", "additionalProperties": {"type": "string"}},
                "seeds": {"type": "object"},
                "version": {"type": "string"},
                "timing": {"type": "object"},
            },
        },
        "fold_plan": {
            "type": "object",
            "required": ["digest", "n_folds", "seed"],
            "properties": {
                "digest": {"type": "string"},
                "n_folds": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer"},
            },
        },
        "metrics": _METRICS,
        "selection": {"type": "object"},
        "per_fold": {"type": "array", "items": {"type": "object", "required": ["fold", "n"]}},
        "series": {
            "type": "object",
            "required": [TIMESTAMP_COLUMN, "truth", "prediction"],
            "properties": {
                TIMESTAMP_COLUMN: {"type": "array", "items": {"type": "string"}},
                "truth": {"type": "array", "items": _NUMBER_OR_NULL},
                "prediction": {"type": "array", "items": _NUMBER_OR_NULL},
                "site": {"type": "array", "items": {"type": "string"}},
            },
        },
        "sites": {"type": "object", "additionalProperties": _METRICS},
        "n_missing": {"type": "integer", "minimum": 0},
    },
}


@dataclass
class RunManifest:
    """What a report was produced from."""

    subcommand: str
    config: Dict[str, Any]
    inputs: Dict[str, str] = field(default_factory=dict)
    seeds: Dict[str, int] = field(default_factory=dict)
    version: str = VERSION
    timing: Optional[Dict[str, float]] = None

    def to_dict(self) -> Dict[str, Any]:
        document = {
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": dict(self.inputs),
            "seeds": dict(self.seeds),
            "version": self.version,
        }
        if self.timing is not None:
            document["timing"] = dict(self.timing)
        return document


def _number(value: Any) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return None if np.isnan(value) else value


def _metrics(average: Mapping[str, MetricStat]) -> Dict[str, Any]:
    return {key: average[key].to_dict() for key in METRIC_KEYS}


def _series(timestamps: pd.DatetimeIndex, truth: np.ndarray, predictions: np.ndarray, rows: np.ndarray, sites=None):
    series = {
        TIMESTAMP_COLUMN: [t.strftime(STAMP_FORMAT) for t in timestamps[rows]],
        "truth": [_number(v) for v in truth[rows]],
        "prediction": [_number(v) for v in predictions[rows]],
    }
    if sites is not None:
        series["site"] = [str(s) for s in sites[rows]]
    return series


def _fold_plan(plan) -> Dict[str, Any]:
    return {"digest": plan.digest(), "n_folds": plan.n_folds, "seed": plan.seed}


def hurdle_report(run, manifest: RunManifest, site_runs: Optional[Mapping[str, Any]] = None) -> Dict[str, Any]:
    """
    Report document of a two-step run.

    Args:
        run: HurdleRun (a pooled run when ``site_runs`` is given)
        manifest: Run manifest
        site_runs: Per-site views of a pooled run, keyed by site id
    """
    rows = run.series_rows()
    per_fold = []
    for result in run.folds:
        counts = result.report.counts
        per_fold.append(
            {
                "fold": result.fold,
                "n": result.report.n,
                "classifier": result.classifier,
                "regressor": result.regressor,
                "counts": {"tp": counts.tp, "fp": counts.fp, "tn": counts.tn, "fn": counts.fn},
            }
        )
    document = {
        "format": REPORT_FORMAT,
        "kind": KIND_HURDLE,
        "site_id": run.site_id,
        "manifest": manifest.to_dict(),
        "fold_plan": _fold_plan(run.fold_plan),
        "metrics": _metrics(run.average),
        "selection": {"classify": run.classify.to_dict(), "regress": run.regress.to_dict()},
        "per_fold": per_fold,
        "series": _series(run.timestamps, run.truth, run.predictions, rows, run.row_sites),
    }
    if site_runs:
        document["sites"] = {site: _metrics(r.average) for site, r in sorted(site_runs.items())}
    validate_report(document)
    return document


def baseline_report(run, manifest: RunManifest) -> Dict[str, Any]:
    """Report document of a surface-fit baseline run."""
    per_fold = [
        {
            "fold": f.fold,
            "n": 0 if f.report is None else f.report.n,
            "k": f.choice.k,
            "gauges": list(f.choice.weights.gauge_ids),
            "weights": [float(w) for w in f.choice.weights.w],
            "rmse_by_k": {str(k): v for k, v in sorted(f.choice.rmse.items())},
            "n_missing": f.n_missing,
        }
        for f in run.folds
    ]
    document = {
        "format": REPORT_FORMAT,
        "kind": KIND_BASELINE,
        "site_id": run.site_id,
        "manifest": manifest.to_dict(),
        "fold_plan": _fold_plan(run.fold_plan),
        "metrics": _metrics(run.average),
        "selection": {"gauge_counts": [f.choice.k for f in run.folds]},
        "per_fold": per_fold,
        "series": _series(run.timestamps, run.truth, run.predictions, np.arange(len(run.truth))),
        "n_missing": run.n_missing,
    }
    validate_report(document)
    return document


def validate_report(document: Mapping[str, Any]) -> None:
    """
    Raises:
        DataError: If the document does not match the report schema
    """
    try:
        validate(instance=document, schema=REPORT_SCHEMA)
    except ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise DataError(f"report does not match the schema at {where}: {e.message}") from e


def write_report(document: Mapping[str, Any], path: Union[str, Path]) -> Path:
    """Write a report with sorted keys, so equal documents give equal bytes."""
    path = Path(path)
    os.makedirs(path.parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")
    logger.info(f"Wrote {document.get('kind')} report for {document.get('site_id')} to {path}")
    return path


def load_report(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"report not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as handle:
            document = json.load(handle)
    except json.JSONDecodeError as e:
        raise DataError(f"report {path} is not valid JSON: {e}") from e
    validate_report(document)
    return document


def _delta(a: Optional[float], b: Optional[float]) -> Optional[float]:
    return None if a is None or b is None else a - b


@dataclass(frozen=True)
class Comparison:
    """Per-metric differences a - b, per fold and of the fold means."""

    label_a: str
    label_b: str
    fold_plan_digest: str
    a: Dict[str, Dict[str, Any]]
    b: Dict[str, Dict[str, Any]]
    deltas: Dict[str, Dict[str, Any]]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "a": self.label_a,
            "b": self.label_b,
            "fold_plan_digest": self.fold_plan_digest,
            "deltas": self.deltas,
        }

    def table(self) -> str:
        """Side-by-side mean ± sd per metric with the delta of the means."""
        lines = [f"{'metric':<12} {self.label_a:>22} {self.label_b:>22} {'delta':>10}"]
        for key in METRIC_KEYS:
            cells = []
            for stats in (self.a[key], self.b[key]):
                if stats["mean"] is None:
                    cells.append("n/a")
                else:
                    cells.append(f"{stats['mean']:.4f} ± {stats['sd']:.4f}")
            delta = self.deltas[key]["mean"]
            lines.append(f"{key:<12} {cells[0]:>22} {cells[1]:>22} {'n/a' if delta is None else f'{delta:+.4f}':>10}")
        return "\n".join(lines)


def compare(report_a: Mapping[str, Any], report_b: Mapping[str, Any]) -> Comparison:
    """
    Compare two reports produced on the same fold plan.

    Raises:
        ComparisonError: If the reports were produced on different fold plans
    """
    digest_a = report_a["fold_plan"]["digest"]
    digest_b = report_b["fold_plan"]["digest"]
    if digest_a != digest_b:
        raise ComparisonError(
            f"reports use different fold plans ({digest_a[:12]} vs {digest_b[:12]}); "
            f"run the baseline with the fold plan written by impute --foldplan-out"
        )
    deltas: Dict[str, Dict[str, Any]] = {}
    for key in METRIC_KEYS:
        a = report_a["metrics"][key]
        b = report_b["metrics"][key]
        deltas[key] = {
            "mean": _delta(a["mean"], b["mean"]),
            "per_fold": [_delta(x, y) for x, y in zip(a["per_fold"], b["per_fold"])],
        }
    label_a = f"{report_a['kind']}:{report_a['site_id']}"
    label_b = f"{report_b['kind']}:{report_b['site_id']}"
    return Comparison(label_a, label_b, digest_a, dict(report_a["metrics"]), dict(report_b["metrics"]), deltas)


def series_frame(source: Any) -> pd.DataFrame:
    """Long-format (timestamp, truth, prediction) frame of a report document or a run."""
    if isinstance(source, Mapping):
        series = source["series"]
        frame = pd.DataFrame(
            {
                TIMESTAMP_COLUMN: pd.to_datetime(series[TIMESTAMP_COLUMN], utc=True),
                "truth": np.array([np.nan if v is None else v for v in series["truth"]], dtype=float),
                "prediction": np.array([np.nan if v is None else v for v in series["prediction"]], dtype=float),
            }
        )
        if "site" in series:
            frame.insert(1, "site", series["site"])
        return frame
    rows = source.series_rows() if hasattr(source, "series_rows") else np.arange(len(source.truth))
    return pd.DataFrame(
        {
            TIMESTAMP_COLUMN: source.timestamps[rows],
            "truth": np.asarray(source.truth)[rows],
            "prediction": np.asarray(source.predictions)[rows],
        }
    )


def _utc(value: Union[str, pd.Timestamp]) -> pd.Timestamp:
    stamp = pd.Timestamp(value)
    return stamp.tz_localize("UTC") if stamp.tz is None else stamp.tz_convert("UTC")


def export_series(
    source: Any,
    path: Optional[Union[str, Path]] = None,
    start: Optional[Union[str, pd.Timestamp]] = None,
    end: Optional[Union[str, pd.Timestamp]] = None,
) -> pd.DataFrame:
    """
    Plot-ready prediction series restricted to a window.

    Args:
        source: Report document, HurdleRun or BaselineRun
        path: CSV file to write, if given
        start: First timestamp of the window (inclusive), default the first row
        end: Last timestamp of the window (inclusive), default the last row

    Returns:
        Frame with timestamp, truth and prediction columns

    Raises:
        WindowError: If the window holds no sample
    """
    frame = series_frame(source)
    if frame.empty:
        raise WindowError("the run holds no samples")
    stamps = frame[TIMESTAMP_COLUMN]
    lo = stamps.iloc[0] if start is None else _utc(start)
    hi = stamps.iloc[-1] if end is None else _utc(end)
    window = frame[(stamps >= lo) & (stamps <= hi)].reset_index(drop=True)
    if window.empty:
        raise WindowError(f"no samples between {lo} and {hi} (series spans {stamps.min()} .. {stamps.max()})")
    if path is not None:
        os.makedirs(Path(path).parent, exist_ok=True)
        window.rename(columns={"truth": f"{TARGET_COLUMN}_truth", "prediction": f"{TARGET_COLUMN}_prediction"}).to_csv(
            path, index=False, date_format=STAMP_FORMAT
        )
        logger.info(f"Exported {len(window)} samples to {path}")
    return window


@dataclass(frozen=True)
class SiteSummary:
    """Chosen-family frequencies and mean ± sd of the site means per metric."""

    n_sites: int
    classifiers: Dict[str, int]
    regressors: Dict[str, int]
    metrics: Dict[str, MetricStat]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n_sites": self.n_sites,
            "classifiers": dict(self.classifiers),
            "regressors": dict(self.regressors),
            "metrics": {k: {"mean": v.mean, "sd": v.sd, "n_missing": v.n_missing} for k, v in self.metrics.items()},
        }


def summarize_sites(reports: Sequence[Mapping[str, Any]]) -> SiteSummary:
    """
    Aggregate per-site reports of one kind.

    Raises:
        DataError: Without reports, or when report kinds are mixed
    """
    if not reports:
        raise DataError("no reports to summarize")
    kinds = {r["kind"] for r in reports}
    if len(kinds) > 1:
        raise DataError(f"cannot summarize mixed report kinds {sorted(kinds)}")
    classifiers: Counter = Counter()
    regressors: Counter = Counter()
    for report in reports:
        selection = report.get("selection", {})
        if "classify" in selection and selection["classify"]["winner"]:
            classifiers[selection["classify"]["winner"]] += 1
        if "regress" in selection and selection["regress"]["winner"]:
            regressors[selection["regress"]["winner"]] += 1
    metrics = {key: summarize([r["metrics"][key]["mean"] for r in reports]) for key in METRIC_KEYS}
    return SiteSummary(len(reports), dict(classifiers.most_common()), dict(regressors.most_common()), metrics)
