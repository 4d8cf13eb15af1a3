"""
The DATA App: per-switch statistics collection, degradation detection and
the two matching-scheme adaptation procedures.

Each observation period the Statistics Collector samples (f, delta_f) at
every reachable switch. The Analyzer classifies the sample; a predicted
degradation demotes the heaviest destinations to MMOS, a good state may
promote one MMOS destination back to FMS.
"""
import logging
from functools import partial
from typing import Callable, Dict, List, Optional, Tuple, Union

from .db.database import SharedDatabase
from .ml.svm import classify
from .models.schemas import (
    AnalyzerConfig,
    AnalyzerMode,
    AnalyzerRecord,
    DestFlowStats,
    FlowKey,
    Health,
    MatchScheme,
    ObservationSample,
    PolicyAction,
    SvmModel,
)
from .sim.controller import ReactiveForwarding
from .sim.dataplane import SwitchState
from .utils.errors import ConfigInvalid, SwitchUnreachable

logger = logging.getLogger(__name__)

Classifier = Callable[[ObservationSample], int]


def _as_classifier(model: Union[SvmModel, Classifier]) -> Classifier:
    if isinstance(model, SvmModel):
        return partial(classify, model)
    return model


def threshold_classifier(f_thres: float) -> Classifier:
    return lambda x: 1 if x.f < f_thres else -1


class StatisticsCollector:
    def __init__(self, controller: ReactiveForwarding, observation_period: float):
        self.controller = controller
        self.observation_period = observation_period
        # (switch, host) -> (MMOS entry id, packet count at last collection)
        self._mmos_counts: Dict[Tuple[int, int], Tuple[int, int]] = {}

    def collect_stats(
        self,
        sw: SwitchState,
        prev_f: Optional[int],
        period_index: Optional[int] = None,
        now: Optional[float] = None,
    ) -> Tuple[ObservationSample, DestFlowStats]:
        if sw.health == Health.DISCONNECTED:
            raise SwitchUnreachable(sw.switch_id)
        if self.controller.suspended:
            raise SwitchUnreachable(sw.switch_id, "controller suspended")

        f_now = sw.f
        sample = ObservationSample(
            f=f_now,
            delta_f=f_now - (prev_f or 0),
            switch_id=sw.switch_id,
            period_index=period_index,
            time=now,
        )

        rates = []
        for host in self.controller.policy.mmos_hosts(sw.switch_id):
            ident = (sw.switch_id, host)
            entry = sw.table.get(FlowKey.mmos(host))
            if entry is None:
                self._mmos_counts.pop(ident, None)
                rates.append((host, 0.0))
                continue
            previous = self._mmos_counts.get(ident)
            base = previous[1] if previous is not None and previous[0] == entry.entry_id else 0
            rates.append((host, (entry.packet_count - base) / self.observation_period))
            self._mmos_counts[ident] = (entry.entry_id, entry.packet_count)

        counts = sw.table.dest_flow_counts()
        stats = DestFlowStats(switch_id=sw.switch_id, pairs=counts.pairs, f_i=counts.f_i, mmos_rates=rates)
        return sample, stats


def select_mmos_hosts(stats: DestFlowStats, model: Union[SvmModel, Classifier]) -> List[int]:
    """
    Destinations to demote from FMS to MMOS at one switch.

    Walks the destinations by descending entry count and stops at the first
    prefix after which the switch could handle the remaining entries (one
    MMOS entry plus the untouched destinations).
    """
    classifier = _as_classifier(model)
    ordered = sorted(stats.pairs, key=lambda pair: (-pair[1], pair[0]))
    selected: List[int] = []
    for p, (host, _) in enumerate(ordered):
        selected.append(host)
        f_remaining = 1 + sum(count for _, count in ordered[p + 1:])
        delta_f = stats.f_i - f_remaining
        if classifier(ObservationSample(f=f_remaining, delta_f=delta_f)) == 1:
            break
    return selected


def select_fms_candidates(stats: DestFlowStats, f_i: int, f_cap: float, idle_timeout: float) -> List[int]:
    # worst case: every packet of a promoted host opens a new entry
    ordered = sorted(stats.mmos_rates, key=lambda pair: (pair[1], pair[0]))
    return [host for host, rate in ordered if idle_timeout * rate + f_i < f_cap]


class DataApp:
    def __init__(
        self,
        config: AnalyzerConfig,
        controller: ReactiveForwarding,
        db: Optional[SharedDatabase] = None,
        model: Optional[SvmModel] = None,
    ):
        if config.mode == AnalyzerMode.DATA and model is None:
            raise ConfigInvalid([("svm_model_path", "DATA mode requires a trained SVM model")])
        self.config = config
        self.controller = controller
        self.db = db if db is not None else SharedDatabase(config.history, model)
        self.db.model = model
        self.collector = StatisticsCollector(controller, config.observation_period)
        self.period_index = 0
        self.actions: List[PolicyAction] = []
        self._prev_f: Dict[int, int] = {}
        self.db.sync_policy(controller.policy.snapshot())

    @property
    def classifier(self) -> Optional[Classifier]:
        if self.config.mode == AnalyzerMode.DATA:
            return partial(classify, self.db.model)
        if self.config.mode == AnalyzerMode.THRESHOLD:
            return threshold_classifier(self.config.f_thres)
        return None

    @property
    def promotion_capacity(self) -> float:
        # a threshold switch treats f_thres as its table size
        if self.config.mode == AnalyzerMode.THRESHOLD:
            return self.config.f_thres
        return self.config.f_cap

    def attach(self, simulator) -> None:
        simulator.on_tick(lambda now: self.analyzer_step(simulator.switches, now))

    def _issue(self, switch_id: int, host: int, scheme: MatchScheme, now: float) -> Optional[PolicyAction]:
        try:
            mods = self.controller.set_scheme(switch_id, host, scheme, now)
        except SwitchUnreachable as exc:
            logger.warning("t=%.3f dropped %s action for switch %s: %s", now, scheme.value, switch_id, exc.reason)
            return None
        return PolicyAction(time=now, switch_id=switch_id, host=host, scheme=scheme, mods=len(mods))

    def analyzer_step(self, switches: Dict[int, SwitchState], now: float) -> List[PolicyAction]:
        classifier = self.classifier
        policy = self.controller.policy
        issued: List[PolicyAction] = []

        for switch_id in sorted(switches):
            sw = switches[switch_id]
            try:
                sample, stats = self.collector.collect_stats(sw, self._prev_f.get(switch_id), self.period_index, now)
            except SwitchUnreachable as exc:
                self.db.record_gap(now, switch_id, exc.reason)
                self.db.log(AnalyzerRecord(time=now, switch_id=switch_id, reachable=False))
                continue

            self._prev_f[switch_id] = sample.f
            self.db.add_sample(switch_id, sample)
            self.db.record_rates(switch_id, stats.mmos_rates)

            verdict = None
            step: List[PolicyAction] = []
            if classifier is not None:
                verdict = classifier(sample)
                if verdict == -1:
                    for host in select_mmos_hosts(stats, classifier):
                        if policy.scheme_for(switch_id, host) != MatchScheme.MMOS:
                            step.append(self._issue(switch_id, host, MatchScheme.MMOS, now))
                elif policy.mmos_hosts(switch_id):
                    rates = stats.model_copy(update={"mmos_rates": self.db.mmos_rates(switch_id)})
                    candidates = select_fms_candidates(
                        rates, stats.f_i, self.promotion_capacity, self.config.idle_timeout
                    )
                    if candidates:
                        step.append(self._issue(switch_id, candidates[0], MatchScheme.FMS, now))
            step = [action for action in step if action is not None]
            issued.extend(step)

            summary = " ".join(f"{a.scheme.value}:{a.host:x}" for a in step)
            self.db.log(AnalyzerRecord(
                time=now, switch_id=switch_id, f=sample.f, delta_f=sample.delta_f,
                verdict=verdict, actions=summary,
            ))
            logger.info(
                "t=%.1f switch %s f=%d df=%+d verdict=%s actions=[%s]",
                now, switch_id, sample.f, sample.delta_f, verdict, summary,
            )

        self.period_index += 1
        self.db.sync_policy(policy.snapshot())
        self.actions.extend(issued)
        return issued
