"""
Command line entry point: python -m flowagg <command> ...

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from .harness import (
    DESK_RATES,
    SVM_TRAINING_RATES,
    ExperimentRun,
    collect_ids_samples,
    collect_svm_samples,
    error_summary,
    load_config,
    run_experiment,
    sweep,
    with_updates,
)
from .ml import ids, svm
from .models.schemas import ExperimentConfig
from .sim.traffic import read_schedule, write_schedule
from .utils.errors import ConfigInvalid, FlowAggError
from .utils.log import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _base_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        updates["output_dir"] = args.out
    return with_updates(cfg, **updates) if updates else cfg


def _rates(text: Optional[str], default: List[float]) -> List[float]:
    if not text:
        return list(default)
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigInvalid([("--rates", str(exc))]) from exc


def cmd_gen_training(args) -> int:
    cfg = _base_config(args)
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    samples = collect_svm_samples(cfg, rates=_rates(args.rates, SVM_TRAINING_RATES), duration=args.duration)
    svm.write_samples(samples, os.path.join(out, "svm_samples.csv"))
    windows = collect_ids_samples(cfg, rates=_rates(args.ids_rates, DESK_RATES), duration=args.duration)
    ids.write_features(windows, os.path.join(out, "ids_features.csv"))
    print(f"wrote {len(samples)} svm samples and {len(windows)} ids windows to {out}")
    return EXIT_OK


def cmd_train_svm(args) -> int:
    samples = svm.read_samples(args.samples)
    model = svm.train(samples, c_param=args.c, tol=args.tol, max_iter=args.max_iter, f_cap=args.f_cap)
    svm.save_model(model, args.model)
    print(f"w=({model.w1:.4f}, {model.w2:.4f}) b={model.b:.4f} margin={svm.margin(model):.4f} "
          f"accuracy={svm.accuracy(model, samples):.3f} converged={model.converged}")
    return EXIT_OK


def cmd_train_ids(args) -> int:
    samples = ids.read_features(args.features)
    grid = ids.som_train(samples, grid_size=args.grid_size, epochs=args.epochs, seed=args.seed)
    ids.save_grid(grid, args.grid)
    print(f"SOM {grid.grid_size}x{grid.grid_size} accuracy={grid.accuracy:.3f} flagged={grid.flagged}")
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _base_config(args)
    run = ExperimentRun(cfg).run()
    if args.schedule_out:
        write_schedule(run.schedule, args.schedule_out)
    report = run.write_outputs(cfg.output_dir) if cfg.output_dir else run.report()
    _print_report(report)
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = _base_config(args)
    report = run_experiment(cfg, schedule=read_schedule(args.schedule))
    _print_report(report)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    model = svm.load_model(cfg.svm_model_path) if cfg.svm_model_path else None
    grid = ids.load_grid(cfg.ids_grid_path) if cfg.ids_grid_path else None
    result = sweep(
        cfg,
        rates=_rates(args.rates, DESK_RATES),
        model=model,
        grid=grid,
        workers=args.workers,
        out_dir=cfg.output_dir or "sweep-out",
    )
    failed = [c for c in result.cells if c.error]
    for cell in failed:
        print(f"cell {cell.scheme} R={cell.rate:g} failed: {cell.error}", file=sys.stderr)
    print(f"{len(result.cells)} cells, {len(failed)} failed")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("flowagg.main:app", host=args.host, port=args.port, log_level=args.log_level.lower())
    return EXIT_OK


def _print_report(report) -> None:
    print(f"{report.name}: mode={report.mode.value} R={report.rate:g} seed={report.seed}")
    print(f"  packet_in rate {report.packet_in_rate:.3f}/s, max entries {max(report.max_entries.values(), default=0)}")
    print(f"  errors: {error_summary(report)}; disconnections {report.disconnections}")
    if report.detection_rate is not None:
        print(f"  detection {report.detection_rate:.1f}%, false positives {report.false_positive_rate:.1f}%")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flowagg", description="SDN flow-rule aggregation simulator")
    parser.add_argument("--log-level", default="WARNING", help="logging level (default: WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="experiment config (JSON)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("gen-training", help="generate SVM and IDS training sets in the simulator")
    with_config(p)
    p.add_argument("--rates", help="comma-separated loads for SVM samples")
    p.add_argument("--ids-rates", help="comma-separated loads for IDS windows")
    p.add_argument("--duration", type=float, default=60.0)
    p.set_defaults(func=cmd_gen_training)

    p = sub.add_parser("train-svm", help="train the degradation SVM from a sample CSV")
    p.add_argument("samples")
    p.add_argument("model")
    p.add_argument("--c", type=float, default=svm.DEFAULT_C)
    p.add_argument("--tol", type=float, default=svm.DEFAULT_TOL)
    p.add_argument("--max-iter", type=int, default=svm.DEFAULT_MAX_ITER)
    p.add_argument("--f-cap", type=int, default=300)
    p.set_defaults(func=cmd_train_svm)

    p = sub.add_parser("train-ids", help="train the SOM detector from a feature CSV")
    p.add_argument("features")
    p.add_argument("grid")
    p.add_argument("--grid-size", type=int, default=8)
    p.add_argument("--epochs", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_train_ids)

    p = sub.add_parser("run", help="run one experiment")
    with_config(p)
    p.add_argument("--schedule-out", help="export the generated packet schedule as CSV")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="run one experiment on a packet schedule CSV")
    with_config(p)
    p.add_argument("schedule")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("sweep", help="run the scheme x load matrix")
    with_config(p)
    p.add_argument("--rates", help="comma-separated loads")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        for path, message in exc.diagnostics:
            print(f"config error: {path}: {message}", file=sys.stderr)
        return EXIT_CONFIG
    except (FlowAggError, OSError, ValueError) as exc:
        logger.debug("command failed", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
