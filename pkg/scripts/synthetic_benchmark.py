#!/usr/bin/env python3
"""
Script to run the synthetic end-to-end benchmark: two-step model vs surface fitting.
"""

import sys
import argparse
import logging
import time
from pathlib import Path

# Add src to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from raingap.config import load_grid, load_settings
from raingap.hurdle import HurdleConfig, run_hurdle
from raingap.preprocess import prepare_table
from raingap.report import RunManifest, baseline_report, compare, hurdle_report, write_report
from raingap.surface import run_baseline
from raingap.synth import SynthConfig, generate, occurrence_statistics, write_synthetic
from raingap.tuning import TunedStore, tune_site


def main():
    """Main CLI entry point"""
    parser = argparse.ArgumentParser(
        description="Run the two-step model and the surface-fit baseline on a synthetic dataset"
    )
    parser.add_argument("--sites", type=int, default=2, help="Number of synthetic sites")
    parser.add_argument("--gauges", type=int, default=6, help="Gauges per site")
    parser.add_argument("--days", type=int, default=1042, help="Days of 30-minute samples")
    parser.add_argument("--seed", type=int, default=42, help="Generator and run seed")
    parser.add_argument("--config", type=str, default=str(Path(__file__).parent.parent / "configs" / "desk.json"))
    parser.add_argument("--threads", type=int, default=4, help="Worker threads")
    parser.add_argument("--out", type=str, default="./benchmark", help="Output directory")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")

    args = parser.parse_args()

    # Configure logging
    log_level = logging.DEBUG if args.debug else logging.INFO
    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    started = time.perf_counter()
    settings = load_settings(config_file=args.config)
    settings.override(seed=args.seed, threads=args.threads)
    out = Path(args.out)

    dataset = generate(SynthConfig(n_sites=args.sites, n_gauges=args.gauges, days=args.days, seed=args.seed))
    write_synthetic(dataset, out / "dataset")

    store = TunedStore(split_seed=settings.seed, grid_version=settings.grid_version)
    config = HurdleConfig.from_settings(settings)
    options = config.options
    passed = True
    for table in dataset.tables:
        stats = occurrence_statistics(dataset.truth[table.site_id].target)
        print(
            f"{table.site_id}: wet fraction {stats.rain_fraction:.4f} (target 0.10 ± 0.02), "
            f"single-sample events {stats.single_sample_fraction:.4f} (target 0.485 ± 0.07)"
        )

        prepared = prepare_table(table, config.feature_set, config.cyclic, config.core_features)
        tune_site(prepared, store, settings.grids, options=options, n_jobs=settings.threads)
        run = run_hurdle(table, store, config)
        baseline = run_baseline(table, dataset.catalog, run.fold_plan)

        manifest = RunManifest("benchmark", config.snapshot(), seeds={"seed": settings.seed})
        hurdle_doc = write_report(hurdle_report(run, manifest), out / f"{table.site_id}_hurdle.json")
        baseline_doc = write_report(baseline_report(baseline, manifest), out / f"{table.site_id}_baseline.json")
        comparison = compare(hurdle_report(run, manifest), baseline_report(baseline, manifest))
        print(comparison.table())

        precision = (run.average["prec"].mean, baseline.average["prec"].mean)
        recall = (run.average["recall"].mean, baseline.average["recall"].mean)
        if not (precision[0] > precision[1] and recall[1] > recall[0]):
            passed = False
            print(f"❌ {table.site_id}: expected higher two-step precision and higher baseline recall")
        print(f"Reports: {hurdle_doc}, {baseline_doc}")

    store.save(out / "tuned.json")
    print(f"Finished in {time.perf_counter() - started:.0f} s")
    if passed:
        print("✅ Two-step precision exceeds surface-fit precision and surface-fit recall exceeds two-step recall")
        sys.exit(0)
    sys.exit(1)


if __name__ == "__main__":
    main()
