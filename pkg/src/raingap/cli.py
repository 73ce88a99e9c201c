#!/usr/bin/env python3
"""
CLI interface for the raingap package.
"""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .artifacts import file_digest, input_digests, save_model
from .config import Settings, load_grid, load_settings
from .const import (
    DEFAULT_MISSING_THRESHOLD,
    DEFAULT_RADIUS_KM,
    ENV_LOG_LEVEL,
    EXIT_OK,
    FAMILY_ORDER,
    FEATURE_COMBINED,
    TASKS,
)
from .dataset import (
    GaugeCatalog,
    IngestConfig,
    RegionSpec,
    SeriesTable,
    build_region_tables,
    build_site_table,
    dataset_files,
    load_dataset,
    pool_region,
    save_dataset,
)
from .exceptions import ConfigError, DataError, RaingapError
from .hurdle import HurdleConfig, run_hurdle, run_regional
from .preprocess import FoldPlan, prepare_table
from .report import (
    RunManifest,
    baseline_report,
    compare,
    export_series,
    hurdle_report,
    load_report,
    summarize_sites,
    write_report,
)
from .surface import run_baseline
from .synth import SynthConfig, generate, occurrence_statistics, write_synthetic
from .tuning import TunedStore, tune_site

logger = logging.getLogger(__name__)


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, help="Path to a JSON config file")
    common.add_argument("--env", type=str, help="Path to .env file")
    common.add_argument("--threads", type=int, help="Worker threads (default RAINGAP_THREADS or 1)")
    common.add_argument("--seed", type=int, help="Random seed for folds, splits and learners")
    common.add_argument("--folds", type=int, help="Number of cross-validation folds")
    common.add_argument("--grid", type=str, help="Hyperparameter grid: full, desk or a JSON file")
    common.add_argument("--debug", action="store_true", help="Enable debug logging")
    return common


def _feature_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--features",
        type=str,
        default=FEATURE_COMBINED,
        help="Feature set: core, cosmos, ea or cosmos+ea (default station+gauges)",
    )
    parser.add_argument("--cyclic", choices=("on", "off"), default="on", help="Add cyclic hour/month columns")


def _target_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--site", type=str, help="Site id")
    group.add_argument("--region", type=str, help="Comma-separated member site ids of a pooled region")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        description="Recover missing 30-minute precipitation with a two-step (rain / amount) model"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", parents=[common], help="Build the canonical dataset from CSV inputs")
    ingest.add_argument("--station", action="append", required=True, metavar="SITE=PATH", help="Station CSV per site")
    ingest.add_argument("--gauges", type=str, help="CSV of 15-minute gauge totals, one column per gauge id")
    ingest.add_argument("--catalog", type=str, help="Gauge catalog CSV")
    ingest.add_argument("--radius-km", type=float, default=DEFAULT_RADIUS_KM)
    ingest.add_argument("--missing-threshold", type=float, default=DEFAULT_MISSING_THRESHOLD)
    ingest.add_argument("--region", action="store_true", help="Share the union of nearby gauges across the sites")
    ingest.add_argument("--out", type=str, required=True, help="Output dataset directory")

    synth = sub.add_parser("synth", parents=[common], help="Generate a synthetic dataset")
    synth.add_argument("--sites", type=int, default=2)
    synth.add_argument("--gauges", type=int, default=6)
    synth.add_argument("--days", type=int, default=30)
    synth.add_argument("--diurnal", action="store_true", help="Modulate rain onset over the day")
    synth.add_argument("--out", type=str, required=True, help="Output dataset directory")

    tune = sub.add_parser("tune", parents=[common], help="Grid-search learner parameters per site or region")
    tune.add_argument("--dataset", type=str, required=True)
    _target_args(tune)
    _feature_args(tune)
    tune.add_argument("--families", type=str, help="Comma-separated learner families (default all)")
    tune.add_argument("--tasks", type=str, help="Comma-separated tasks (default classify,regress)")
    tune.add_argument("--store", type=str, required=True, help="Tuned store JSON, updated in place")

    impute = sub.add_parser("impute", parents=[common], help="Run the cross-validated two-step imputation")
    impute.add_argument("--dataset", type=str, required=True)
    _target_args(impute)
    _feature_args(impute)
    impute.add_argument("--families", type=str, help="Comma-separated learner families (default all)")
    impute.add_argument("--store", type=str, required=True, help="Tuned store JSON")
    impute.add_argument("--foldplan", type=str, help="Fold plan JSON to reuse")
    impute.add_argument("--foldplan-out", type=str, help="Write the fold plan used")
    impute.add_argument("--models-out", type=str, help="Directory for the fitted per-fold learners")
    impute.add_argument("--report", type=str, help="Report JSON (default <output_dir>/<site>_hurdle.json)")
    impute.add_argument("--record-timing", action="store_true", help="Store wall-clock timing in the manifest")

    baseline = sub.add_parser("baseline", parents=[common], help="Run the surface-fit baseline on a fold plan")
    baseline.add_argument("--dataset", type=str, required=True)
    baseline.add_argument("--site", type=str, required=True)
    baseline.add_argument("--catalog", type=str, help="Gauge catalog CSV (default the dataset's catalog)")
    baseline.add_argument("--foldplan", type=str, required=True, help="Fold plan JSON written by impute")
    baseline.add_argument("--candidates", type=str, help="Comma-separated candidate gauge counts")
    baseline.add_argument("--report", type=str, help="Report JSON (default <output_dir>/<site>_baseline.json)")
    baseline.add_argument("--record-timing", action="store_true", help="Store wall-clock timing in the manifest")

    comparison = sub.add_parser("compare", parents=[common], help="Compare two reports on the same fold plan")
    comparison.add_argument("report_a", type=str)
    comparison.add_argument("report_b", type=str)
    comparison.add_argument("--out", type=str, help="Write the deltas as JSON")

    export = sub.add_parser("export", parents=[common], help="Export truth and prediction series as CSV")
    export.add_argument("--report", type=str, required=True)
    export.add_argument("--start", type=str, help="Window start (ISO 8601, UTC)")
    export.add_argument("--end", type=str, help="Window end (ISO 8601, UTC)")
    export.add_argument("--out", type=str, help="CSV path (default <output_dir>/<report name>_series.csv)")

    summary = sub.add_parser("summary", parents=[common], help="Summarize per-site reports")
    summary.add_argument("reports", nargs="+", type=str)
    summary.add_argument("--out", type=str, help="Write the summary as JSON")
    return parser


def _split(value: Optional[str]) -> Optional[List[str]]:
    if not value:
        return None
    return [item.strip() for item in value.split(",") if item.strip()]


def _settings(args: argparse.Namespace) -> Settings:
    settings = load_settings(config_file=args.config, env_file=args.env)
    if args.grid:
        settings.update(load_grid(args.grid))
    settings.override(threads=args.threads, seed=args.seed, folds=args.folds)
    if not args.debug:
        logging.getLogger().setLevel(settings.log_level)
    return settings


def _table(tables: Dict[str, SeriesTable], site: str) -> SeriesTable:
    if site not in tables:
        raise DataError(f"site '{site}' is not in the dataset (sites: {', '.join(sorted(tables))})")
    return tables[site]


def _region(value: str) -> RegionSpec:
    return RegionSpec(tuple(_split(value) or ()))


def _output_path(settings: Settings, given: Optional[str], name: str) -> str:
    if given:
        return given
    return str(Path(settings.output_dir) / name)


def _json_out(document, path: str) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")


def cmd_ingest(args: argparse.Namespace, settings: Settings) -> str:
    stations = {}
    for item in args.station:
        site, sep, path = item.partition("=")
        if not sep or not site or not path:
            raise ConfigError(f"--station expects SITE=PATH, got '{item}'")
        stations[site] = path
    catalog = GaugeCatalog.from_csv(args.catalog) if args.catalog else None
    config = IngestConfig(radius_km=args.radius_km, missing_threshold=args.missing_threshold)
    if args.region:
        if catalog is None or args.gauges is None:
            raise ConfigError("--region needs --gauges and --catalog")
        spec = RegionSpec(tuple(stations))
        tables = build_region_tables(stations, args.gauges, catalog, spec, config)
    else:
        tables = [build_site_table(path, args.gauges, catalog, site, config) for site, path in stations.items()]
    save_dataset(args.out, tables, catalog, config)
    return f"Dataset of {len(tables)} sites saved to: {args.out}"


def cmd_synth(args: argparse.Namespace, settings: Settings) -> str:
    config = SynthConfig(
        n_sites=args.sites,
        n_gauges=args.gauges,
        days=args.days,
        seed=settings.seed,
        diurnal=args.diurnal,
    )
    dataset = generate(config)
    write_synthetic(dataset, args.out)
    for site_id, record in sorted(dataset.truth.items()):
        stats = occurrence_statistics(record.target)
        print(
            f"  {site_id}: wet fraction {stats.rain_fraction:.4f}, "
            f"single-sample events {stats.single_sample_fraction:.4f}, {stats.n_events} events"
        )
    return f"Synthetic dataset saved to: {args.out}"


def _prepared(args: argparse.Namespace, tables: Dict[str, SeriesTable]):
    if args.region:
        spec = _region(args.region)
        table = pool_region([_table(tables, s) for s in spec.member_sites], spec)
        return spec.name, table
    return args.site, _table(tables, args.site)


def cmd_tune(args: argparse.Namespace, settings: Settings) -> str:
    tables, _ = load_dataset(args.dataset)
    key, table = _prepared(args, tables)
    table = prepare_table(table, args.features, args.cyclic == "on", settings.core_features)
    store_path = Path(args.store)
    if store_path.exists():
        store = TunedStore.load(store_path)
        if store.split_seed != settings.seed:
            raise ConfigError(f"store {store_path} was tuned with split seed {store.split_seed}, not {settings.seed}")
    else:
        store = TunedStore(split_seed=settings.seed, grid_version=settings.grid_version)
    families = _split(args.families) or list(FAMILY_ORDER)
    tasks = _split(args.tasks) or list(TASKS)
    unknown = set(families) - set(FAMILY_ORDER) | set(tasks) - set(TASKS)
    if unknown:
        raise ConfigError(f"unknown families or tasks: {sorted(unknown)}")
    options = {
        "boosting": settings.boosting,
        "forest": settings.forest,
        "knn": settings.knn,
        "svm": settings.svm,
        "network": settings.network,
    }
    tune_site(table, store, settings.grids, families, tasks, options, settings.threads)
    store.save(store_path)
    return f"Tuned parameters for {key} saved to: {store_path}"


def _manifest(args: argparse.Namespace, settings: Settings, config: dict, inputs: Dict[str, str]) -> RunManifest:
    return RunManifest(
        subcommand=args.command,
        config=config,
        inputs=inputs,
        seeds={"seed": settings.seed},
    )


def cmd_impute(args: argparse.Namespace, settings: Settings) -> str:
    started = time.perf_counter()
    tables, _ = load_dataset(args.dataset)
    store = TunedStore.load(args.store)
    config = HurdleConfig.from_settings(settings, args.features, args.cyclic == "on", _split(args.families))
    plan = FoldPlan.load(args.foldplan) if args.foldplan else None
    inputs = input_digests(dataset_files(args.dataset))
    inputs["store"] = file_digest(args.store)
    if args.foldplan:
        inputs["foldplan"] = file_digest(args.foldplan)

    if args.region:
        spec = _region(args.region)
        run, site_runs = run_regional([_table(tables, s) for s in spec.member_sites], spec, store, config, plan)
    else:
        run, site_runs = run_hurdle(_table(tables, args.site), store, config, fold_plan=plan), None

    report_path = _output_path(settings, args.report, f"{run.site_id}_hurdle.json")
    manifest = _manifest(args, settings, config.snapshot(), inputs)
    elapsed = time.perf_counter() - started
    logger.info(f"Two-step run finished in {elapsed:.1f} s")
    if args.record_timing:
        manifest.timing = {"seconds": round(elapsed, 3)}
    write_report(hurdle_report(run, manifest, site_runs), report_path)

    if args.foldplan_out:
        run.fold_plan.save(args.foldplan_out)
        logger.info(f"Saved fold plan to {args.foldplan_out}")
    if args.models_out:
        for fold, models in sorted(run.models.items()):
            for task, model in sorted(models.items()):
                save_model(Path(args.models_out) / f"fold{fold}_{task}.joblib", model, f"learner-{task}")
    return f"Report saved to: {report_path}"


def cmd_baseline(args: argparse.Namespace, settings: Settings) -> str:
    started = time.perf_counter()
    tables, dataset_catalog = load_dataset(args.dataset)
    catalog = GaugeCatalog.from_csv(args.catalog) if args.catalog else dataset_catalog
    if catalog is None:
        raise ConfigError("no gauge catalog: pass --catalog or store one with the dataset")
    plan = FoldPlan.load(args.foldplan)
    candidates = [int(k) for k in _split(args.candidates) or []] or None
    run = run_baseline(
        _table(tables, args.site),
        catalog,
        plan,
        candidates,
        threshold=settings.surface["prune_threshold"],
        max_candidates=settings.surface["max_candidates"],
    )
    inputs = input_digests(dataset_files(args.dataset))
    inputs["foldplan"] = file_digest(args.foldplan)
    if args.catalog:
        inputs["catalog"] = file_digest(args.catalog)
    manifest = _manifest(
        args,
        settings,
        {"surface": dict(settings.surface), "candidates": candidates, "site": args.site},
        inputs,
    )
    elapsed = time.perf_counter() - started
    logger.info(f"Baseline run finished in {elapsed:.1f} s")
    if args.record_timing:
        manifest.timing = {"seconds": round(elapsed, 3)}
    report_path = _output_path(settings, args.report, f"{args.site}_baseline.json")
    write_report(baseline_report(run, manifest), report_path)
    return f"Report saved to: {report_path}"


def cmd_compare(args: argparse.Namespace, settings: Settings) -> str:
    comparison = compare(load_report(args.report_a), load_report(args.report_b))
    print(comparison.table())
    if args.out:
        _json_out(comparison.to_dict(), args.out)
    return f"Compared {comparison.label_a} with {comparison.label_b}"


def cmd_export(args: argparse.Namespace, settings: Settings) -> str:
    out = _output_path(settings, args.out, f"{Path(args.report).stem}_series.csv")
    frame = export_series(load_report(args.report), out, args.start, args.end)
    return f"Exported {len(frame)} samples to: {out}"


def cmd_summary(args: argparse.Namespace, settings: Settings) -> str:
    summary = summarize_sites([load_report(p) for p in args.reports])
    for name, count in summary.classifiers.items():
        print(f"  classifier {name}: {count} of {summary.n_sites} sites")
    for name, count in summary.regressors.items():
        print(f"  regressor {name}: {count} of {summary.n_sites} sites")
    for key, stat in summary.metrics.items():
        if stat.mean is not None:
            print(f"  {key}: {stat.mean:.4f} ± {stat.sd:.4f}")
    if args.out:
        _json_out(summary.to_dict(), args.out)
    return f"Summarized {summary.n_sites} reports"


COMMANDS = {
    "ingest": cmd_ingest,
    "synth": cmd_synth,
    "tune": cmd_tune,
    "impute": cmd_impute,
    "baseline": cmd_baseline,
    "compare": cmd_compare,
    "export": cmd_export,
    "summary": cmd_summary,
}


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main CLI entry point"""
    args = build_parser().parse_args(argv)

    # Configure logging
    log_level = logging.DEBUG if args.debug else os.getenv(ENV_LOG_LEVEL, "INFO").upper()
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    try:
        settings = _settings(args)
        message = COMMANDS[args.command](args, settings)
    except RaingapError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"❌ {type(e).__name__}: {e}")
        sys.exit(e.exit_code)

    print(f"✅ {message}")
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
