"""Command-line interface.

Subcommands: ``generate`` synthetic panels, ``simulate`` one strategy,
``compare`` all strategies, ``mc-study`` the sequential-test size study,
``report`` analytics from an event log, ``serve`` the operator service.
Report paths emit CSV plus rendered PNG figures side by side.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import figures, reports
from .calendar import load_calendar_config, save_calendar_config
from .config import engine_config_from_dict, strategy_from_dict
from .engine import EngineConfig, StrategySpec, run_strategy
from .eventlog import EventLog
from .features import FeatureCache
from .forest import ForestConfig
from .panel import ingest_csv, write_csv
from .synthgen import (
    MCConfig,
    SyntheticPanelConfig,
    benchmark_panel,
    generate_panel,
    run_size_study,
    size_study_grid,
)

DEFAULT_DATA_DIR = os.environ.get("MLMA_DATA_DIR", "./mlma-data")


def _add_panel_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="panel CSV (timestamp,stream_id,value)")
    p.add_argument("--calendar", required=True, help="calendar config JSON")


def _add_engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="engine config JSON file")
    p.add_argument("--window-days", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--trees", type=int)
    p.add_argument("--mtry", type=int)
    p.add_argument("--max-depth", type=int)
    p.add_argument("--min-node-size", type=int)
    p.add_argument("--jobs", type=int)


def _engine_config(args) -> EngineConfig:
    raw = {}
    if args.config:
        raw = json.loads(Path(args.config).read_text())
    forest = dict(raw.get("forest", {}))
    for key, val in [
        ("n_trees", args.trees),
        ("mtry", args.mtry),
        ("max_depth", args.max_depth),
        ("min_node_size", args.min_node_size),
    ]:
        if val is not None:
            forest[key] = val
    if forest:
        raw["forest"] = forest
    for key, val in [
        ("window_days", args.window_days),
        ("alpha", args.alpha),
        ("seed", args.seed),
        ("n_jobs", args.jobs),
    ]:
        if val is not None:
            raw[key] = val
    return engine_config_from_dict(raw)


def _strategy(args) -> StrategySpec:
    return StrategySpec(
        kind=args.strategy,
        period_days=args.period_days,
        smape_threshold=args.smape_threshold,
        decision_policy=args.policy,
    )


def cmd_generate(args) -> int:
    shifts: list[tuple] = []
    if args.shifts:
        per_stream: dict[int, list] = {}
        for part in args.shifts.split(";"):
            idx, day, level, vol = part.split(":")
            per_stream.setdefault(int(idx), []).append((int(day), float(level), float(vol)))
        shifts = [tuple(per_stream.get(i, [])) for i in range(args.streams)]
    if args.preset == "benchmark":
        panel = benchmark_panel(D=args.streams, days=args.days, seed=args.seed)
    else:
        cfg = SyntheticPanelConfig(
            D=args.streams,
            days=args.days,
            trend_slope=args.trend,
            noise_sd=args.noise,
            shift_schedule=tuple(shifts),
            seed=args.seed,
        )
        panel = generate_panel(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(panel, out)
    save_calendar_config(panel.calendar, args.calendar_out)
    print(f"wrote {panel.D} streams x {panel.n_days} days to {out}")
    return 0


def cmd_simulate(args) -> int:
    calendar = load_calendar_config(args.calendar)
    panel = ingest_csv(args.data, calendar)
    config = _engine_config(args)
    spec = _strategy(args)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    log = EventLog(out_dir / "events.jsonl", run_id=args.run_id)
    report = run_strategy(panel, spec, config, log=log)
    log.close()
    (out_dir / "report.json").write_text(report.to_json() + "\n")
    print(f"strategy {spec.kind}: avg SMAPE {report.avg_smape:.3f}, "
          f"{len(report.retrain_events)} re-trainings, {report.alerts} alerts")
    print(f"labor {report.labor.usd_per_month:.2f} USD/month, "
          f"cpu {report.compute.cpu_usd_per_year:.2f} USD/year, "
          f"co2 {report.compute.co2_usd_per_year:.2f} USD/year")
    print(f"report: {out_dir / 'report.json'}")
    return 0


def cmd_compare(args) -> int:
    calendar = load_calendar_config(args.calendar)
    panel = ingest_csv(args.data, calendar)
    config = _engine_config(args)
    specs = [
        StrategySpec(kind="mlma"),
        StrategySpec(kind="mlma_manual"),
        StrategySpec(kind="do_nothing_ml"),
        StrategySpec(kind="do_nothing_naive"),
        StrategySpec(kind="periodic", period_days=1),
        StrategySpec(kind="periodic", period_days=182),
        StrategySpec(kind="on_demand", smape_threshold=30.0),
    ]
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cache = FeatureCache(panel)
    results = []
    for spec in specs:
        report = run_strategy(panel, spec, config, cache=cache)
        results.append(report)
        print(f"{spec.kind:<18} SMAPE {report.avg_smape:8.3f}  "
              f"retrains {len(report.retrain_events):6d}")
    reports.write_comparison_csv(results, out_dir / "comparison.csv")
    summary = reports.comparison_summary(results)
    (out_dir / "summary.txt").write_text(summary)
    figures.smape_cost_figure(reports.comparison_rows(results), out_dir / "smape_vs_cost.png")
    print(summary)
    print(f"wrote {out_dir / 'comparison.csv'}, summary.txt, smape_vs_cost.png")
    return 0


def cmd_mc_study(args) -> int:
    out = Path(args.out) if args.out else None
    if args.full_grid:
        results = size_study_grid(
            replications=args.reps, seed=args.seed, long_stream_replications=args.long_reps
        )
    else:
        cfg = MCConfig(
            distribution=args.dist,
            stream_length=getattr(args, "len"),
            batch_size=args.batch,
            alpha=args.alpha,
            replications=args.reps,
            seed=args.seed,
        )
        results = [run_size_study(cfg)]
    for r in results:
        c = r.config
        print(f"{c.distribution:<11} len={c.stream_length:<7} batch={c.batch_size:<4} "
              f"alpha={c.alpha:<5} -> {r.rejection_frequency:.4f} (se {r.mc_stderr:.4f})")
    if out:
        out.parent.mkdir(parents=True, exist_ok=True)
        reports.write_mc_csv(results, out)
        print(f"wrote {out}")
    return 0


def cmd_report(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = reports.metrics_from_log(args.log)
    if args.durations:
        for sid in sorted(metrics):
            print(f"{sid}: {','.join(str(d) for d in metrics[sid].durations)}")
        return 0
    reports.write_durations_csv(metrics, out_dir / "durations.csv")
    reports.write_metrics_csv(metrics, out_dir / "metrics.csv")
    figures.durations_figure(metrics, out_dir / "durations.png")
    counts = reports.daily_retrain_counts(metrics)
    figures.retrain_counts_figure(counts, len(metrics), out_dir / "retrain_counts.png")
    for sid in sorted(metrics):
        figures.pit_figure(metrics, sid, out_dir / f"loss_pairs_{sid}.png")
    written = ["durations.csv", "metrics.csv", "durations.png", "retrain_counts.png"]
    if args.data and args.calendar:
        calendar = load_calendar_config(args.calendar)
        panel = ingest_csv(args.data, calendar)
        for series in panel.streams:
            profile = reports.seasonal_profile(series)
            reports.write_seasonal_profile_csv(profile, out_dir / f"profile_{series.stream_id}.csv")
            figures.seasonal_profile_figure(profile, series.stream_id,
                                            out_dir / f"profile_{series.stream_id}.png")
        if panel.D >= 2:
            for series in panel.streams:
                rc = reports.rolling_correlation(panel, series.stream_id, window_days=args.corr_window)
                reports.write_rolling_correlation_csv(rc, out_dir / f"corr_{series.stream_id}.csv")
                figures.rolling_correlation_figure(rc, series.stream_id,
                                                   out_dir / f"corr_{series.stream_id}.png")
        written.append("profile_*/corr_* per stream")
    print(f"wrote {', '.join(written)} in {out_dir}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import RunStore, create_app

    store = RunStore(Path(args.data_dir))
    app = create_app(store)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mlma", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic panel CSV + calendar config")
    p.add_argument("--out", required=True)
    p.add_argument("--calendar-out", required=True)
    p.add_argument("--streams", type=int, default=8)
    p.add_argument("--days", type=int, default=400)
    p.add_argument("--noise", type=float, default=0.6)
    p.add_argument("--trend", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--shifts", help="stream_idx:day:level_mult:vol_mult;...")
    p.add_argument("--preset", choices=["benchmark"], default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("simulate", help="run one monitoring strategy headless")
    _add_panel_args(p)
    _add_engine_args(p)
    p.add_argument("--strategy", default="mlma",
                   choices=["mlma", "mlma_manual", "do_nothing_ml", "do_nothing_naive",
                            "periodic", "on_demand"])
    p.add_argument("--period-days", type=int)
    p.add_argument("--smape-threshold", type=float)
    p.add_argument("--policy", default="auto_threshold", choices=["auto_threshold", "always"])
    p.add_argument("--out-dir", default=DEFAULT_DATA_DIR)
    p.add_argument("--run-id", default="simulate")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run every strategy on one panel")
    _add_panel_args(p)
    _add_engine_args(p)
    p.add_argument("--out-dir", default=DEFAULT_DATA_DIR)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("mc-study", help="rejection-rate study of the sequential test")
    p.add_argument("--dist", choices=["gaussian", "chisquare5"], default="gaussian")
    p.add_argument("--len", type=int, default=10_000)
    p.add_argument("--batch", type=int, default=10)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--full-grid", action="store_true")
    p.add_argument("--long-reps", type=int, default=200,
                   help="replications for 100k-length streams in --full-grid")
    p.add_argument("--out")
    p.set_defaults(func=cmd_mc_study)

    p = sub.add_parser("report", help="analytics from a run's event log")
    p.add_argument("--log", required=True)
    p.add_argument("--data")
    p.add_argument("--calendar")
    p.add_argument("--corr-window", type=int, default=30)
    p.add_argument("--out-dir", default=DEFAULT_DATA_DIR)
    p.add_argument("--durations", action="store_true", help="print durations only")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("serve", help="start the operator HTTP service")
    p.add_argument("--data-dir", default=DEFAULT_DATA_DIR)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
