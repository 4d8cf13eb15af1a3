"""
Discrete-event simulation of the switch data plane.

Events are kept in a heap ordered by (time, kind rank, switch id,
sequence number), so a run is a pure function of its inputs.
"""
import heapq
import json
import logging
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from ..models.schemas import (
    ErrorKind,
    ErrorRecord,
    EventKind,
    FlowEntry,
    FlowMod,
    FlowModOp,
    Health,
    PacketHeader,
    PacketIn,
    PacketOutcome,
    SimEvent,
    TraceRecord,
)
from ..utils.errors import TableFull
from ..utils.rng import stream
from .controller import ReactiveForwarding
from .flowtable import FlowTable
from .topology import Topology

logger = logging.getLogger(__name__)

TIME_EPS = 1e-9


class SwitchState:
    def __init__(self, switch_id: int, f_cap: int, disconnect_delay: float = 8.0):
        self.switch_id = switch_id
        self.table = FlowTable(f_cap, switch_id)
        self.health = Health.HEALTHY
        self.error_log: List[ErrorRecord] = []
        self.degraded_since: Optional[float] = None
        self.disconnected_at: Optional[float] = None
        self.disconnect_delay = disconnect_delay
        self.max_entries = 0

    @property
    def f(self) -> int:
        return self.table.f

    @property
    def last_error_time(self) -> Optional[float]:
        return self.error_log[-1].time if self.error_log else None

    def first_error_time(self) -> Optional[float]:
        return self.error_log[0].time if self.error_log else None

    def log_error(self, now: float, kind: ErrorKind) -> None:
        self.error_log.append(ErrorRecord(time=now, kind=kind))


class ProcessResult(BaseModel):
    outcome: PacketOutcome
    packet_in: Optional[PacketIn] = None


def process_packet(sw: SwitchState, pkt: PacketHeader, now: float) -> ProcessResult:
    if sw.health == Health.DISCONNECTED:
        return ProcessResult(outcome=PacketOutcome.DROPPED)
    if sw.table.match_packet(pkt, now).hit:
        return ProcessResult(outcome=PacketOutcome.FORWARDED)
    return ProcessResult(
        outcome=PacketOutcome.PACKET_IN,
        packet_in=PacketIn(switch_id=sw.switch_id, packet=pkt, time=now),
    )


def update_health(sw: SwitchState, now: float, window: float) -> Health:
    """
    Advance the degradation state machine of one switch.

    Healthy -> Degraded on an error inside (now - window, now];
    Degraded -> Healthy after a full error-free window with f < f_cap;
    otherwise Degraded -> Disconnected once degraded for disconnect_delay.
    """
    if sw.health == Health.DISCONNECTED:
        return sw.health

    last = sw.last_error_time
    if sw.health == Health.HEALTHY:
        if last is not None and now - window < last <= now:
            sw.health = Health.DEGRADED
            sw.degraded_since = last
            logger.info("t=%.3f switch %s degraded", now, sw.switch_id)

    if sw.health == Health.DEGRADED:
        clean = last is None or now - last >= window
        if clean and sw.f < sw.table.f_cap:
            sw.health = Health.HEALTHY
            sw.degraded_since = None
            logger.info("t=%.3f switch %s recovered", now, sw.switch_id)
        elif now - sw.degraded_since >= sw.disconnect_delay - TIME_EPS:
            sw.health = Health.DISCONNECTED
            sw.disconnected_at = now
            sw.log_error(now, ErrorKind.CHANNEL_DISCONNECTED)
            logger.warning("t=%.3f switch %s disconnected", now, sw.switch_id)
    return sw.health


def apply_flow_mod(sw: SwitchState, mod: FlowMod, now: float, window: float = 3.0) -> List[FlowEntry]:
    """
    Apply one flow_mod. Returns the removed entries (flow_removed notifications).

    A rejected add is logged as TableFull on a healthy switch and as
    FlowRuleException once the switch is already degraded.
    """
    if sw.health == Health.DISCONNECTED:
        return []
    if mod.op == FlowModOp.REMOVE:
        return sw.table.remove(mod.keys)

    try:
        sw.table.install_entry(mod.key, now, mod.idle_timeout)
    except TableFull:
        kind = ErrorKind.TABLE_FULL if sw.health == Health.HEALTHY else ErrorKind.FLOW_RULE_EXCEPTION
        sw.log_error(now, kind)
        logger.debug("t=%.3f switch %s rejected add: %s", now, sw.switch_id, kind.value)
        update_health(sw, now, window)
    sw.max_entries = max(sw.max_entries, sw.f)
    return []


class TraceLog:
    """Append-only event trace, written as JSON lines."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.records: List[TraceRecord] = []

    def emit(self, t: float, switch: int, kind: EventKind, detail: str = "") -> None:
        if self.enabled:
            self.records.append(TraceRecord(t=t, switch=switch, kind=kind, detail=detail))

    def lines(self) -> Iterable[str]:
        for record in self.records:
            yield json.dumps(record.model_dump(mode="json"), sort_keys=True)

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for line in self.lines():
                fh.write(line + "\n")


class NetworkSimulator:
    def __init__(
        self,
        topology: Topology,
        controller: ReactiveForwarding,
        f_cap: int,
        observation_period: float = 3.0,
        sweep_interval: float = 1.0,
        ctrl_latency: float = 0.0,
        disconnect_delay: Optional[float] = None,
        disconnect_delay_range: Tuple[float, float, float] = (7.0, 8.0, 10.0),
        controller_suspend_after: int = 1,
        rng: Optional[np.random.Generator] = None,
        trace: bool = False,
    ):
        self.topology = topology
        self.controller = controller
        self.observation_period = observation_period
        self.sweep_interval = sweep_interval
        self.ctrl_latency = ctrl_latency
        self.controller_suspend_after = controller_suspend_after
        self.trace = TraceLog(enabled=trace)

        self.switches: Dict[int, SwitchState] = {}
        for sw_id in topology.switch_ids:
            if disconnect_delay is not None:
                delay = disconnect_delay
            else:
                rng = rng if rng is not None else stream(0, "health")
                low, mode, high = disconnect_delay_range
                delay = low if low == high else float(rng.triangular(low, mode, high))
            self.switches[sw_id] = SwitchState(sw_id, f_cap, delay)
        controller.attach(self.switches, self._send_flow_mod)

        self.now = 0.0
        self._heap: List[Tuple[float, int, int, int, SimEvent, Any]] = []
        self._seq = 0
        self._tick_listeners: List[Callable[[float], None]] = []
        self._removed_listeners: List[Callable[[int, FlowEntry, float], None]] = []

        self.offered = 0
        self.forwarded = 0
        self.dropped = 0
        self.pending = 0
        self.entry_series: List[int] = []
        self.series_times: List[float] = []
        self.switch_series: Dict[int, List[int]] = {sw: [] for sw in self.switches}

        self._schedule(EventKind.EVICTION_SWEEP, sweep_interval)
        self._schedule(EventKind.OBSERVATION_TICK, observation_period)

    # Scheduling
    def _schedule(self, kind: EventKind, time: float, switch_id: int = -1, payload: Any = None) -> None:
        event = SimEvent(time=time, kind=kind, switch_id=switch_id, seq=self._seq)
        self._seq += 1
        heapq.heappush(self._heap, (*event.sort_key(), event, payload))

    def load(self, packets: Iterable[PacketHeader]) -> int:
        count = 0
        for pkt in packets:
            path = self.topology.path(pkt.src_mac, pkt.dst_mac)
            self._schedule(EventKind.PACKET_ARRIVAL, pkt.timestamp, path[0], (pkt, path, 0))
            count += 1
        return count

    def on_tick(self, listener: Callable[[float], None]) -> None:
        self._tick_listeners.append(listener)

    def on_flow_removed(self, listener: Callable[[int, FlowEntry, float], None]) -> None:
        self._removed_listeners.append(listener)

    # Control channel
    def _notify_removed(self, sw_id: int, entries: List[FlowEntry], now: float) -> None:
        if not entries:
            return
        self.controller.on_flow_removed(sw_id, len(entries))
        for entry in entries:
            self.trace.emit(now, sw_id, EventKind.FLOW_REMOVED, f"entry={entry.entry_id} pkts={entry.packet_count}")
            for listener in self._removed_listeners:
                listener(sw_id, entry, now)

    def _apply(self, mod: FlowMod, now: float) -> None:
        sw = self.switches[mod.switch_id]
        if sw.health == Health.DISCONNECTED:
            return
        errors_before = len(sw.error_log)
        was_healthy = sw.health == Health.HEALTHY
        removed = apply_flow_mod(sw, mod, now, self.observation_period)
        self.trace.emit(now, sw.switch_id, EventKind.FLOW_MOD, f"{mod.op.value} {len(mod.keys)}")
        self._notify_removed(sw.switch_id, removed, now)
        if len(sw.error_log) > errors_before and was_healthy and sw.health == Health.DEGRADED:
            self._schedule(EventKind.HEALTH_CHECK, sw.degraded_since + sw.disconnect_delay, sw.switch_id)

    def _send_flow_mod(self, mod: FlowMod) -> None:
        self._apply(mod, self.now)

    # Packet path
    def _traverse(self, pkt: PacketHeader, path: List[int], hop: int, now: float) -> None:
        while hop < len(path):
            sw = self.switches[path[hop]]
            result = process_packet(sw, pkt, now)
            if result.outcome == PacketOutcome.DROPPED:
                self.dropped += 1
                return
            if result.outcome == PacketOutcome.PACKET_IN:
                if self.controller.suspended:
                    self.dropped += 1
                    return
                self.trace.emit(now, sw.switch_id, EventKind.PACKET_IN, f"dst={pkt.dst_mac:x}")
                mod = self.controller.handle_packet_in(result.packet_in)
                if self.ctrl_latency > 0:
                    self.pending += 1
                    self._schedule(EventKind.FLOW_MOD, now + self.ctrl_latency, sw.switch_id, (mod, pkt, path, hop))
                    return
                self._apply(mod, now)
                self._check_suspension(now)
                if sw.health == Health.DISCONNECTED:
                    self.dropped += 1
                    return
                # packet_out forwards the held packet even when the install was rejected
            hop += 1
        self.forwarded += 1

    def _check_suspension(self, now: float) -> None:
        if self.controller.suspended:
            return
        down = sum(1 for sw in self.switches.values() if sw.health == Health.DISCONNECTED)
        if down >= self.controller_suspend_after:
            self.controller.suspend(now)

    # Recurring events
    def _sweep(self, now: float) -> None:
        for sw_id, sw in self.switches.items():
            if sw.health == Health.DISCONNECTED:
                continue
            self._notify_removed(sw_id, sw.table.evict_idle(now), now)
            update_health(sw, now, self.observation_period)
        self._check_suspension(now)

        total = 0
        for sw_id, sw in self.switches.items():
            live = sw.f if sw.health != Health.DISCONNECTED else 0
            self.switch_series[sw_id].append(live)
            total += live
        self.entry_series.append(total)
        self.series_times.append(now)
        self.trace.emit(now, -1, EventKind.EVICTION_SWEEP, f"entries={total}")

    def _tick(self, now: float) -> None:
        for sw in self.switches.values():
            update_health(sw, now, self.observation_period)
        self._check_suspension(now)
        self.trace.emit(now, -1, EventKind.OBSERVATION_TICK, "")
        for listener in self._tick_listeners:
            listener(now)

    def _dispatch(self, event: SimEvent, payload: Any) -> None:
        now = event.time
        if event.kind == EventKind.PACKET_ARRIVAL:
            pkt, path, hop = payload
            self.offered += 1
            self.trace.emit(now, event.switch_id, EventKind.PACKET_ARRIVAL, f"{pkt.src_port}->{pkt.dst_port}")
            self._traverse(pkt, path, hop, now)
        elif event.kind == EventKind.FLOW_MOD:
            mod, pkt, path, hop = payload
            self.pending -= 1
            sw = self.switches[mod.switch_id]
            self._apply(mod, now)
            self._check_suspension(now)
            if sw.health == Health.DISCONNECTED:
                self.dropped += 1
            else:
                self._traverse(pkt, path, hop + 1, now)
        elif event.kind == EventKind.EVICTION_SWEEP:
            self._sweep(now)
            self._schedule(EventKind.EVICTION_SWEEP, now + self.sweep_interval)
        elif event.kind == EventKind.OBSERVATION_TICK:
            self._tick(now)
            self._schedule(EventKind.OBSERVATION_TICK, now + self.observation_period)
        elif event.kind == EventKind.HEALTH_CHECK:
            sw = self.switches[event.switch_id]
            update_health(sw, now, self.observation_period)
            self._check_suspension(now)
            self.trace.emit(now, sw.switch_id, EventKind.HEALTH_CHECK, sw.health.value)

    def run(self, until: float) -> None:
        """Process every event with time <= until."""
        while self._heap and self._heap[0][0] <= until:
            *_, event, payload = heapq.heappop(self._heap)
            self.now = event.time
            self.controller.now = event.time
            self._dispatch(event, payload)
        self.now = max(self.now, until)

    # Views
    def error_counts(self) -> Dict[ErrorKind, int]:
        counts = {kind: 0 for kind in ErrorKind}
        for sw in self.switches.values():
            for record in sw.error_log:
                counts[record.kind] += 1
        return counts
