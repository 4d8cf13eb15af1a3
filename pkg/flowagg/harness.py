"""
Experiment orchestration: single runs, the scheme x load sweep, CSV
outputs and the in-simulator training-set generators.
"""
import hashlib
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import pandas as pd
from pydantic import BaseModel, ValidationError

from .data_app import DataApp
from .ml.ids import IdsMonitor, detection_rate, false_positive_rate, load_grid
from .ml.svm import load_model
from .models.schemas import (
    AnalyzerMode,
    AttackConfig,
    ErrorKind,
    ExperimentConfig,
    FlowFeatureVector,
    MatchScheme,
    MetricsReport,
    ObservationSample,
    PacketHeader,
    SomGrid,
    SvmModel,
    Verdict,
)
from .sim.controller import AggregationPolicy, ReactiveForwarding
from .sim.dataplane import NetworkSimulator
from .sim.topology import build_topology
from .sim.traffic import generate_attack, generate_schedule, merge_schedules, resolve_attack
from .utils.errors import ConfigInvalid, ReportWriteError
from .utils.rng import derive_seed, stream

logger = logging.getLogger(__name__)

DESK_RATES = [10.0, 20.0, 30.0]
SVM_TRAINING_RATES = [10.0, 20.0, 30.0, 33.0, 35.0, 38.0, 42.0, 50.0, 60.0]
TRAINING_CAPACITY = 0.7


# Configuration
def config_hash(cfg: ExperimentConfig) -> str:
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def parse_config(data: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigInvalid.from_validation_error(exc) from exc


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigInvalid([(path, str(exc))]) from exc
    try:
        return ExperimentConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigInvalid.from_validation_error(exc) from exc


def with_updates(cfg: ExperimentConfig, **sections) -> ExperimentConfig:
    """Copy a config, updating nested sections, and re-validate the result."""
    data = cfg.model_dump()
    for section, values in sections.items():
        if isinstance(values, dict):
            data[section] = {**(data.get(section) or {}), **values}
        else:
            data[section] = values
    return parse_config(data)


class SchemeSpec(BaseModel):
    label: str
    mode: AnalyzerMode
    threshold_fraction: Optional[float] = None

    def apply(self, cfg: ExperimentConfig) -> ExperimentConfig:
        f_thres = None
        if self.mode == AnalyzerMode.THRESHOLD:
            f_thres = self.threshold_fraction * cfg.analyzer.f_cap
        return with_updates(cfg, analyzer={"mode": self.mode, "f_thres": f_thres})


DEFAULT_SCHEMES = [
    SchemeSpec(label="MMOS", mode=AnalyzerMode.MMOS_ONLY),
    SchemeSpec(label="FMS", mode=AnalyzerMode.FMS_ONLY),
    SchemeSpec(label="Threshold-0.5", mode=AnalyzerMode.THRESHOLD, threshold_fraction=0.5),
    SchemeSpec(label="Threshold-1.0", mode=AnalyzerMode.THRESHOLD, threshold_fraction=1.0),
    SchemeSpec(label="DATA", mode=AnalyzerMode.DATA),
]


# Single run
class ExperimentRun:
    """One configured simulation, advanced incrementally or to the end."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        model: Optional[SvmModel] = None,
        grid: Optional[SomGrid] = None,
        schedule: Optional[List[PacketHeader]] = None,
    ):
        self.cfg = cfg
        self.config_hash = config_hash(cfg)
        if model is None and cfg.svm_model_path:
            model = load_model(cfg.svm_model_path)
        if grid is None and cfg.ids_grid_path:
            grid = load_grid(cfg.ids_grid_path)
        self.model = model
        self.grid = grid

        analyzer = cfg.analyzer
        sim = cfg.simulation
        self.topology = build_topology(cfg.topology)
        default = MatchScheme.MMOS if analyzer.mode == AnalyzerMode.MMOS_ONLY else MatchScheme.FMS
        policy = AggregationPolicy(default, analyzer.response_scheme)
        self.controller = ReactiveForwarding(policy, analyzer.idle_timeout, analyzer.observation_period)
        self.simulator = NetworkSimulator(
            self.topology,
            self.controller,
            f_cap=analyzer.f_cap,
            observation_period=analyzer.observation_period,
            sweep_interval=sim.sweep_interval,
            ctrl_latency=sim.ctrl_latency,
            disconnect_delay=sim.disconnect_delay,
            disconnect_delay_range=sim.disconnect_delay_range,
            controller_suspend_after=sim.controller_suspend_after,
            rng=stream(cfg.seed, "health"),
            trace=sim.trace,
        )
        self.data_app = DataApp(analyzer, self.controller, model=model)
        self.data_app.attach(self.simulator)

        attack_interval = None
        if cfg.attack is not None:
            attack_interval = (cfg.attack.start, cfg.attack.start + cfg.attack.duration)
        self.ids = IdsMonitor(
            self.simulator,
            window=sim.ids_window_periods * analyzer.observation_period,
            grid=grid,
            attack_interval=attack_interval,
        )

        self.schedule = schedule if schedule is not None else self._build_schedule()
        self.simulator.load(self.schedule)
        logger.info(
            "run %s: mode=%s R=%s seed=%s, %d packets",
            cfg.name, analyzer.mode.value, cfg.traffic.rate, cfg.seed, len(self.schedule),
        )

    def _build_schedule(self) -> List[PacketHeader]:
        cfg = self.cfg
        profile = cfg.traffic.model_copy(
            update={"duration": cfg.duration, "seed": derive_seed(cfg.seed, "traffic")}
        )
        background = generate_schedule(profile, self.topology)
        if cfg.attack is None:
            return background
        attack = resolve_attack(cfg.attack, self.topology, derive_seed(cfg.seed, "attack"))
        end = min(cfg.attack.start + cfg.attack.duration, cfg.duration)
        flood = generate_attack(attack, cfg.attack.start, max(end - cfg.attack.start, 0.0), self.topology)
        return merge_schedules(background, flood)

    @property
    def now(self) -> float:
        return self.simulator.now

    @property
    def finished(self) -> bool:
        return self.simulator.now >= self.cfg.duration

    def advance(self, until: float) -> None:
        self.simulator.run(min(until, self.cfg.duration))

    def run(self) -> "ExperimentRun":
        self.advance(self.cfg.duration)
        return self

    def report(self) -> MetricsReport:
        sim = self.simulator
        ctrl = self.controller
        operational = ctrl.suspended_at if ctrl.suspended else sim.now
        rate = ctrl.packet_in_total / operational if operational > 0 else 0.0

        detection = false_positive = None
        if self.cfg.attack is not None and self.grid is not None:
            detection = detection_rate(self.ids.attack_verdicts())
            false_positive = false_positive_rate(self.ids.normal_verdicts())

        return MetricsReport(
            name=self.cfg.name,
            config_hash=self.config_hash,
            mode=self.cfg.analyzer.mode,
            rate=self.cfg.traffic.rate,
            seed=self.cfg.seed,
            duration=self.cfg.duration,
            series_interval=sim.sweep_interval,
            flow_entries=list(sim.entry_series),
            max_entries={sw_id: sw.max_entries for sw_id, sw in sim.switches.items()},
            packet_in_total=ctrl.packet_in_total,
            packet_in_rate=rate,
            operational_time=operational,
            first_error={sw_id: sw.first_error_time() for sw_id, sw in sim.switches.items()},
            disconnect_times={
                sw_id: sw.disconnected_at for sw_id, sw in sim.switches.items() if sw.disconnected_at is not None
            },
            error_counts=sim.error_counts(),
            suspended_at=ctrl.suspended_at,
            offered=sim.offered,
            forwarded=sim.forwarded,
            dropped=sim.dropped,
            pending=sim.pending,
            policy_actions=len(self.data_app.actions),
            detection_rate=detection,
            false_positive_rate=false_positive,
            svm_converged=self.model.converged if self.model is not None else None,
        )

    def write_outputs(self, out_dir: str) -> MetricsReport:
        report = self.report()
        try:
            os.makedirs(out_dir, exist_ok=True)
        except OSError as exc:
            raise ReportWriteError(out_dir, exc) from exc

        emit_csv(report, os.path.join(out_dir, "flow_entries.csv"))
        sim = self.simulator
        per_switch = pd.DataFrame({"t": sim.series_times})
        for sw_id, series in sim.switch_series.items():
            per_switch[f"s{sw_id}"] = series
        _write_frame(per_switch, os.path.join(out_dir, "switch_entries.csv"))

        analyzer = pd.DataFrame(
            [r.model_dump() for r in self.data_app.db.analyzer_log()],
            columns=["time", "switch_id", "f", "delta_f", "verdict", "actions", "reachable"],
        )
        _write_frame(analyzer, os.path.join(out_dir, "analyzer.csv"))

        ids = pd.DataFrame(
            [
                {
                    "start": w.start, "end": w.end, "flows": w.flows,
                    "under_attack": w.under_attack,
                    "verdict": w.verdict.value if w.verdict is not None else "",
                    **(w.features.model_dump() if w.features is not None else {}),
                }
                for w in self.ids.windows
            ],
            columns=["start", "end", "flows", "under_attack", "verdict",
                     "avg_packets_per_flow", "avg_bytes_per_flow", "avg_duration_per_flow", "pair_flow_ratio"],
        )
        _write_frame(ids, os.path.join(out_dir, "ids.csv"))

        try:
            if sim.trace.enabled:
                sim.trace.write(os.path.join(out_dir, "trace.jsonl"))
            with open(os.path.join(out_dir, "metrics.json"), "w", encoding="utf-8") as fh:
                fh.write(report.model_dump_json(indent=2) + "\n")
            meta = {"name": self.cfg.name, "config_hash": self.config_hash, "seed": self.cfg.seed,
                    "config": self.cfg.model_dump(mode="json")}
            with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
                json.dump(meta, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise ReportWriteError(out_dir, exc) from exc
        return report


def run_experiment(
    cfg: ExperimentConfig,
    model: Optional[SvmModel] = None,
    grid: Optional[SomGrid] = None,
    schedule: Optional[List[PacketHeader]] = None,
) -> MetricsReport:
    run = ExperimentRun(cfg, model=model, grid=grid, schedule=schedule).run()
    if cfg.output_dir:
        return run.write_outputs(cfg.output_dir)
    return run.report()


# CSV output
def _write_frame(frame: pd.DataFrame, path: str) -> None:
    try:
        frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n", na_rep="")
    except OSError as exc:
        raise ReportWriteError(path, exc) from exc


def emit_csv(report: MetricsReport, path: str) -> None:
    """Flow-entry time series: one row per sample."""
    times = [round((i + 1) * report.series_interval, 6) for i in range(len(report.flow_entries))]
    frame = pd.DataFrame({"t": times, "total_entries": report.flow_entries}, columns=["t", "total_entries"])
    _write_frame(frame, path)


# Sweep
class SweepCell(BaseModel):
    scheme: str
    rate: float
    seed: int
    report: Optional[MetricsReport] = None
    error: Optional[str] = None


class SweepResult(BaseModel):
    cells: List[SweepCell]

    def table(self, metric: str, schemes: Sequence[str]) -> pd.DataFrame:
        rates = sorted({c.rate for c in self.cells})
        rows = []
        for rate in rates:
            row: Dict[str, Optional[float]] = {"rate": rate}
            for label in schemes:
                cell = next((c for c in self.cells if c.rate == rate and c.scheme == label), None)
                row[label] = getattr(cell.report, metric) if cell is not None and cell.report is not None else None
            rows.append(row)
        return pd.DataFrame(rows, columns=["rate", *schemes])

    def cell(self, scheme: str, rate: float) -> SweepCell:
        return next(c for c in self.cells if c.scheme == scheme and c.rate == rate)


def _run_cell(payload: Tuple[str, Optional[str], Optional[str]]) -> Tuple[Optional[str], Optional[str]]:
    cfg_json, model_json, grid_json = payload
    try:
        cfg = ExperimentConfig.model_validate_json(cfg_json)
        model = SvmModel.model_validate_json(model_json) if model_json else None
        grid = SomGrid.model_validate_json(grid_json) if grid_json else None
        return run_experiment(cfg, model=model, grid=grid).model_dump_json(), None
    except Exception as exc:  # a failed cell never aborts the sweep
        logger.exception("sweep cell %s failed", cfg_json[:80])
        return None, f"{type(exc).__name__}: {exc}"


def sweep(
    base: ExperimentConfig,
    schemes: Sequence[SchemeSpec] = DEFAULT_SCHEMES,
    rates: Sequence[float] = DESK_RATES,
    model: Optional[SvmModel] = None,
    grid: Optional[SomGrid] = None,
    workers: int = 1,
    out_dir: Optional[str] = None,
) -> SweepResult:
    """
    Run every (scheme, rate) cell. Cells at the same rate share one traffic
    seed so schemes are compared on identical traces.
    """
    cells: List[SweepCell] = []
    payloads = []
    for rate in rates:
        seed = derive_seed(base.seed, f"rate={rate:g}")
        for scheme in schemes:
            cfg = with_updates(scheme.apply(base), traffic={"rate": rate}, seed=seed, output_dir=None,
                               name=f"{scheme.label}-R{rate:g}")
            cells.append(SweepCell(scheme=scheme.label, rate=rate, seed=seed))
            payloads.append((
                cfg.model_dump_json(),
                model.model_dump_json() if model is not None else None,
                grid.model_dump_json() if grid is not None else None,
            ))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, payloads))
    else:
        results = [_run_cell(p) for p in payloads]

    for cell, (report_json, error) in zip(cells, results):
        if report_json is not None:
            cell.report = MetricsReport.model_validate_json(report_json)
        cell.error = error
    result = SweepResult(cells=cells)

    failed = [c for c in cells if c.error]
    logger.info("sweep finished: %d cells, %d failed", len(cells), len(failed))
    if out_dir:
        write_sweep(result, [s.label for s in schemes], out_dir)
    return result


def write_sweep(result: SweepResult, schemes: Sequence[str], out_dir: str) -> None:
    try:
        os.makedirs(os.path.join(out_dir, "cells"), exist_ok=True)
    except OSError as exc:
        raise ReportWriteError(out_dir, exc) from exc
    _write_frame(result.table("packet_in_rate", schemes), os.path.join(out_dir, "table1.csv"))
    _write_frame(result.table("detection_rate", schemes), os.path.join(out_dir, "table2.csv"))
    for cell in result.cells:
        if cell.report is not None:
            emit_csv(cell.report, os.path.join(out_dir, "cells", f"{cell.scheme}_R{cell.rate:g}.csv"))
    status = pd.DataFrame(
        [(c.scheme, c.rate, c.seed, c.error or "") for c in result.cells],
        columns=["scheme", "rate", "seed", "error"],
    )
    _write_frame(status, os.path.join(out_dir, "cells.csv"))


# Training-set generators
def label_samples(
    records: Sequence[ObservationSample],
    error_times: Dict[int, List[float]],
    period: float,
    horizon: int = 2,
) -> List[ObservationSample]:
    """-1 when the switch logs an error inside (t - period, t + horizon * period]."""
    labelled = []
    for s in records:
        times = error_times.get(s.switch_id, [])
        bad = any(s.time - period < t <= s.time + horizon * period for t in times)
        labelled.append(s.model_copy(update={"sign": -1 if bad else 1}))
    return labelled


def collect_svm_samples(
    base: ExperimentConfig,
    rates: Sequence[float] = SVM_TRAINING_RATES,
    duration: float = 60.0,
    label_horizon: int = 0,
    capacity_fraction: float = TRAINING_CAPACITY,
) -> List[ObservationSample]:
    """
    FMS for request traffic, MMOS for responses, one run per rate; every
    reachable (switch, period) sample is labelled by the errors around it.

    The runs use tables cut to `capacity_fraction` of f_cap, so a model
    trained on these samples flags degradation while the real table still
    has that much headroom. Rates cluster around the load that saturates
    the reduced table.
    """
    samples: List[ObservationSample] = []
    f_cap = max(1, round(base.analyzer.f_cap * capacity_fraction))
    for rate in rates:
        cfg = with_updates(
            base,
            analyzer={
                "mode": AnalyzerMode.FMS_ONLY, "response_scheme": MatchScheme.MMOS,
                "f_cap": f_cap, "f_thres": None,
            },
            traffic={"rate": rate},
            seed=derive_seed(base.seed, f"svm-training@{rate:g}"),
            duration=duration,
            attack=None,
            output_dir=None,
        )
        run = ExperimentRun(cfg).run()
        errors = {sw_id: [e.time for e in sw.error_log] for sw_id, sw in run.simulator.switches.items()}
        observed = [
            ObservationSample(f=r.f, delta_f=r.delta_f, switch_id=r.switch_id, time=r.time)
            for r in run.data_app.db.analyzer_log()
            if r.reachable
        ]
        batch = label_samples(observed, errors, cfg.analyzer.observation_period, label_horizon)
        logger.info(
            "svm samples at R=%g: %d (%d degraded)", rate, len(batch), sum(1 for s in batch if s.sign == -1)
        )
        samples.extend(batch)
    return samples


def collect_ids_samples(
    base: ExperimentConfig,
    rates: Sequence[float] = DESK_RATES,
    attack_rates: Sequence[float] = (5.0, 10.0, 20.0),
    duration: float = 120.0,
    capacity_factor: int = 10,
) -> List[Tuple[FlowFeatureVector, Verdict]]:
    """Per-window IDS features from FMS runs with ample table capacity, with and without SYN floods."""
    samples: List[Tuple[FlowFeatureVector, Verdict]] = []
    f_cap = base.analyzer.f_cap * capacity_factor
    for rate in rates:
        for syn_rate in [None, *attack_rates]:
            attack = None
            if syn_rate is not None:
                attack = AttackConfig(syn_rate=syn_rate, start=duration / 4, duration=duration / 2).model_dump()
            cfg = with_updates(
                base,
                analyzer={"mode": AnalyzerMode.FMS_ONLY, "f_cap": f_cap, "f_thres": None},
                traffic={"rate": rate},
                attack=attack,
                seed=derive_seed(base.seed, f"ids-training@{rate:g}/{syn_rate}"),
                duration=duration,
                output_dir=None,
            )
            run = ExperimentRun(cfg).run()
            samples.extend(run.ids.labelled_samples())
    logger.info("ids samples: %d windows", len(samples))
    return samples


def error_summary(report: MetricsReport) -> str:
    parts = [f"{kind.value}={report.error_counts.get(kind, 0)}" for kind in ErrorKind]
    return ", ".join(parts)
