"""Command-line pipeline: synth, prepare, train, evaluate, score.

Exit codes: 0 success, 1 validation error, 2 runtime/numeric error.
Logs go to stderr; data outputs go to files and stdout only.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from datetime import date
from pathlib import Path

from . import evaluate as eval_mod
from . import features, ingest, plots
from . import model as model_mod
from . import resample as resample_mod
from . import synth as synth_mod
from .config import PipelineConfig, load_config
from .errors import ComputeError, ValidationError

log = logging.getLogger("vegrisk")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vegrisk",
        description="Vegetation-related outage risk pipeline over daily weather and vegetation data.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="TOML configuration file")
    common.add_argument("--seed", type=int, default=None, help="override the root seed")
    common.add_argument("--output", type=Path, default=None, help="override the output directory")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", parents=[common], help="write synthetic weather/vegetation/outage CSVs")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("prepare", parents=[common], help="ingest raw CSVs into daily samples and rate tables")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("train", parents=[common], help="fit the risk model on the training split")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", parents=[common], help="evaluate on the held-out test split")
    p.add_argument("--model", type=Path, default=None, help="model JSON (default: <output>/model.json)")
    p.add_argument(
        "--predictions", type=Path, default=None,
        help="externally produced predictions CSV (date,score) evaluated instead of the model",
    )
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("score", parents=[common], help="score a feature CSV or a single raw day")
    p.add_argument("--model", type=Path, default=None, help="model JSON (default: <output>/model.json)")
    p.add_argument("--features", type=Path, default=None, help="feature-table CSV to score")
    p.add_argument("--date", type=date.fromisoformat, default=None, help="raw day: calendar date")
    p.add_argument("--tavg", type=float, default=None, help="raw day: average temperature, deg C")
    p.add_argument("--prcp", type=float, default=None, help="raw day: precipitation, mm")
    p.add_argument("--wspd", type=float, default=None, help="raw day: wind speed, m/s")
    p.add_argument("--wdir", type=float, default=None, help="raw day: wind direction, degrees")
    p.add_argument("--evi", type=float, default=None, help="raw day: vegetation index in [-1, 1]")
    p.set_defaults(func=cmd_score)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args.config, seed=args.seed, output_dir=args.output)
        return args.func(config, args)
    except ValidationError as exc:
        log.error("%s", exc)
        return 1
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 1
    except ComputeError as exc:
        log.error("%s", exc)
        return 2
    except Exception:
        log.exception("unexpected failure")
        return 2


def cmd_synth(config: PipelineConfig, args) -> int:
    started = time.perf_counter()
    dataset = synth_mod.generate(config.synth)
    paths = synth_mod.write_dataset(dataset, config.output_dir)
    log.info(
        "synth: %d weather days, %d composites, %d outage records (%d positive days) in %.2fs",
        len(dataset.weather), len(dataset.evi), len(dataset.outages),
        len(dataset.truth.positive_days), time.perf_counter() - started,
    )
    for path in paths.values():
        log.info("synth: wrote %s", path)
    return 0


def cmd_prepare(config: PipelineConfig, args) -> int:
    started = time.perf_counter()
    weather = ingest.impute_weather(ingest.parse_weather(config.weather_file))
    if not weather:
        raise ValidationError(f"{config.weather_file}: no weather rows")
    start = config.start or weather[0].date
    end = config.end or weather[-1].date
    weather = [r for r in weather if start <= r.date <= end]
    if not weather or weather[0].date != start or weather[-1].date != end:
        raise ValidationError(f"weather does not cover the range {start.isoformat()}..{end.isoformat()}")
    evi = ingest.daily_evi_series(ingest.parse_evi(config.evi_file), start, end)
    outages = ingest.parse_outages(config.outages_file)
    samples = ingest.join_daily(weather, evi, outages, config.vegetation_causes)

    config.output_dir.mkdir(parents=True, exist_ok=True)
    ingest.write_daily(samples, config.daily_file)
    wind_report = features.rates_by_wind_bin(samples, features.BinSpec(config.wind_bin_edges))
    snow_report = features.rates_by_snow_type(samples)
    features.write_rates_csv(wind_report, config.output_dir / "rates_by_wind.csv")
    features.write_rates_csv(snow_report, config.output_dir / "rates_by_snow.csv")
    if config.render_figures:
        plots.plot_grouped_rates(
            wind_report, config.output_dir / "rates_by_wind.png",
            "Outage rate by wind speed", "wind speed bin (m/s)",
        )
        plots.plot_grouped_rates(
            snow_report, config.output_dir / "rates_by_snow.png",
            "Outage rate by snow class", "snow class",
        )
    log.info(
        "prepare: %d daily samples, %d positive, in %.2fs",
        len(samples), sum(s.outage for s in samples), time.perf_counter() - started,
    )
    return 0


def cmd_train(config: PipelineConfig, args) -> int:
    samples = ingest.read_daily(config.daily_file)
    table = features.build_feature_table(samples, config.wind_convention)
    split = eval_mod.temporal_split(table, config.train_fraction)
    log.info(
        "split: %d train rows through %s, %d test rows from %s",
        len(split.train), split.train.dates[-1].isoformat(), len(split.test), split.split_date.isoformat(),
    )
    scaling = features.fit_scaling(split.train)
    log.info("scaling: fitted on the %d training rows only", len(split.train))
    train_table = features.apply_scaling(split.train, scaling)
    if config.resample.enabled:
        t0 = time.perf_counter()
        before = len(train_table)
        train_table = resample_mod.smoteenn(train_table, config.resample)
        log.info("resample: train rows only, %d -> %d in %.2fs", before, len(train_table), time.perf_counter() - t0)
    else:
        log.info("resample: disabled")
    t0 = time.perf_counter()
    fitted = model_mod.fit(train_table, config.train, scaling=scaling)
    log.info(
        "fit: %d iterations, final loss %.6f in %.2fs",
        fitted.metadata["iterations"], fitted.metadata["final_loss"], time.perf_counter() - t0,
    )
    config.output_dir.mkdir(parents=True, exist_ok=True)
    model_mod.save_model(fitted, config.model_file)
    report = model_mod.coefficient_report(fitted)
    eval_mod.write_coefficients_csv(report, config.output_dir / "coefficients.csv")
    if config.render_figures:
        plots.plot_coefficients(report, config.output_dir / "coefficients.png")
    log.info("train: wrote %s", config.model_file)
    return 0


def cmd_evaluate(config: PipelineConfig, args) -> int:
    samples = ingest.read_daily(config.daily_file)
    table = features.build_feature_table(samples, config.wind_convention)
    split = eval_mod.temporal_split(table, config.train_fraction)
    test = split.test
    wind_bins = features.BinSpec(config.wind_bin_edges)

    if args.predictions is not None:
        by_date = eval_mod.read_predictions_csv(args.predictions)
        missing = [d for d in test.dates if d not in by_date]
        if missing:
            raise ValidationError(
                f"{args.predictions}: no prediction for test date {missing[0].isoformat()} (+{len(missing) - 1} more)"
            )
        scores = [by_date[d] for d in test.dates]
        report = eval_mod.evaluate_scores(
            test, scores, wind_bins,
            threshold=config.threshold, tolerance=config.match_tolerance,
            min_cell_count=config.min_cell_count, evi_bin_count=config.evi_bin_count,
        )
    else:
        fitted = model_mod.load_model(args.model or config.model_file)
        report = eval_mod.evaluate_model(
            test, fitted, wind_bins,
            threshold=config.threshold, tolerance=config.match_tolerance,
            min_cell_count=config.min_cell_count, evi_bin_count=config.evi_bin_count,
        )

    config.output_dir.mkdir(parents=True, exist_ok=True)
    eval_mod.write_report_json(report, config.output_dir / "report.json")
    eval_mod.write_metrics_csv(report, config.output_dir / "metrics.csv")
    eval_mod.write_heatmap_csv(report.cells, config.output_dir / "heatmap.csv")
    if report.coefficients is not None:
        eval_mod.write_coefficients_csv(report.coefficients, config.output_dir / "coefficients.csv")
    if config.render_figures:
        n_evi = len(report.cells) // len(wind_bins.labels)
        evi_labels = [report.cells[i].evi_bin for i in range(n_evi)]
        plots.plot_heatmap(report.cells, wind_bins.labels, evi_labels, config.output_dir / "heatmap.png")
    _print_summary(report)
    return 0


def _print_summary(report: eval_mod.EvaluationReport) -> None:
    def fmt(value):
        return "n/a" if value is None else f"{value:.4f}"

    c = report.confusion
    print("metric                  value")
    print(f"test rows               {report.test_rows} ({report.test_positives} positive)")
    print(f"confusion tp/fp/tn/fn   {c.tp}/{c.fp}/{c.tn}/{c.fn}")
    print(f"precision               {fmt(report.precision)}")
    print(f"recall                  {fmt(report.recall)}")
    print(f"f1                      {fmt(report.f1)}")
    print(f"roc_auc                 {fmt(report.roc_auc)}")
    print(f"match_rate (cells)      {fmt(report.match_rate)}")
    print(f"match_rate (per sample) {fmt(report.match_rate_per_sample)}")


def cmd_score(config: PipelineConfig, args) -> int:
    fitted = model_mod.load_model(args.model or config.model_file)
    if args.features is not None:
        table = features.read_table(args.features, require_label=False)
        probs = model_mod.predict_proba(fitted, table)
        writer = csv.writer(sys.stdout)
        writer.writerow(("date", "probability"))
        for day, p in zip(table.dates, probs):
            writer.writerow((day.isoformat(), repr(float(p))))
        return 0

    raw = {"date": args.date, "tavg": args.tavg, "prcp": args.prcp, "wspd": args.wspd, "wdir": args.wdir, "evi": args.evi}
    missing = [name for name, value in raw.items() if value is None]
    if missing:
        raise ValidationError(f"raw-day scoring needs --{missing[0]} (or pass --features CSV)")
    if args.prcp < 0:
        raise ValidationError(f"prcp must be >= 0, got {args.prcp}")
    if args.wspd < 0:
        raise ValidationError(f"wspd must be >= 0, got {args.wspd}")
    if not 0.0 <= args.wdir < 360.0:
        raise ValidationError(f"wdir must lie in [0, 360), got {args.wdir}")
    if not -1.0 <= args.evi <= 1.0:
        raise ValidationError(f"evi must lie in [-1, 1], got {args.evi}")
    sample = ingest.DailySample(args.date, args.tavg, args.prcp, args.wspd, args.wdir, args.evi, 0)
    table = features.build_feature_table([sample], config.wind_convention)
    probability = float(model_mod.predict_proba(fitted, table)[0])
    print(repr(probability))
    return 0


if __name__ == "__main__":
    sys.exit(main())
