"""
Built-in reactive forwarding application.

Answers packet_in with a single add flow_mod at the granularity the
AggregationPolicy prescribes, and carries out the scheme changes the DATA
App requests.
"""
import logging
from typing import Callable, Dict, List, Optional, Tuple

from ..models.schemas import (
    ControllerStats,
    FlowKey,
    FlowMod,
    MatchScheme,
    PacketFlag,
    PacketIn,
    PolicyOverride,
    PolicySnapshot,
)
from ..utils.errors import SwitchUnreachable

logger = logging.getLogger(__name__)


class AggregationPolicy:
    def __init__(self, default_scheme: MatchScheme = MatchScheme.FMS, response_scheme: Optional[MatchScheme] = None):
        self.default_scheme = default_scheme
        # applied to ACK-flagged packets when no per-host override exists
        self.response_scheme = response_scheme
        self._overrides: Dict[Tuple[int, int], MatchScheme] = {}

    def scheme_for(self, switch_id: int, host: int) -> MatchScheme:
        return self._overrides.get((switch_id, host), self.default_scheme)

    def scheme_for_packet(self, switch_id: int, host: int, flags: PacketFlag) -> MatchScheme:
        override = self._overrides.get((switch_id, host))
        if override is not None:
            return override
        if self.response_scheme is not None and flags == PacketFlag.ACK:
            return self.response_scheme
        return self.default_scheme

    def set(self, switch_id: int, host: int, scheme: MatchScheme) -> None:
        if scheme == self.default_scheme:
            self._overrides.pop((switch_id, host), None)
        else:
            self._overrides[(switch_id, host)] = scheme

    def overrides(self, switch_id: Optional[int] = None) -> Dict[Tuple[int, int], MatchScheme]:
        if switch_id is None:
            return dict(self._overrides)
        return {k: v for k, v in self._overrides.items() if k[0] == switch_id}

    def mmos_hosts(self, switch_id: int) -> List[int]:
        return sorted(
            host for (sw, host), scheme in self._overrides.items()
            if sw == switch_id and scheme == MatchScheme.MMOS
        )

    def snapshot(self) -> PolicySnapshot:
        return PolicySnapshot(
            default_scheme=self.default_scheme,
            response_scheme=self.response_scheme,
            overrides=[
                PolicyOverride(switch_id=sw, host=host, scheme=scheme)
                for (sw, host), scheme in sorted(self._overrides.items())
            ],
        )


class ReactiveForwarding:
    def __init__(self, policy: AggregationPolicy, idle_timeout: float = 10.0, stats_window: float = 3.0):
        self.policy = policy
        self.idle_timeout = idle_timeout
        self.stats_window = stats_window
        self.switches: Dict[int, "SwitchState"] = {}
        self._channel: Optional[Callable[[FlowMod], None]] = None

        self.packet_in_total = 0
        self.flow_mod_total = 0
        self.flow_removed_total = 0
        self._windows: Dict[int, ControllerStats] = {}
        self.suspended_at: Optional[float] = None
        self.now = 0.0

    def attach(self, switches: Dict[int, "SwitchState"], channel: Callable[[FlowMod], None]) -> None:
        """Connect the switches and the southbound channel that applies flow_mods."""
        self.switches = switches
        self._channel = channel

    @property
    def suspended(self) -> bool:
        return self.suspended_at is not None

    def suspend(self, now: float) -> None:
        if self.suspended_at is None:
            self.suspended_at = now
            logger.warning("controller suspended at t=%.3f", now)

    def _window(self, now: float) -> ControllerStats:
        index = int(now // self.stats_window)
        stats = self._windows.get(index)
        if stats is None:
            stats = ControllerStats(
                window_index=index,
                window_start=index * self.stats_window,
                window_length=self.stats_window,
            )
            self._windows[index] = stats
        return stats

    def _count_mods(self, mods: List[FlowMod], now: float) -> None:
        self.flow_mod_total += len(mods)
        self._window(now).flow_mod_count += len(mods)

    def handle_packet_in(self, pkt_in: PacketIn) -> FlowMod:
        pkt = pkt_in.packet
        self.now = pkt_in.time
        self.packet_in_total += 1
        self._window(pkt_in.time).packet_in_count += 1

        scheme = self.policy.scheme_for_packet(pkt_in.switch_id, pkt.dst_mac, pkt.flags)
        mod = FlowMod.add(pkt_in.switch_id, FlowKey.for_packet(pkt, scheme), self.idle_timeout)
        self._count_mods([mod], pkt_in.time)
        return mod

    def on_flow_removed(self, switch_id: int, count: int = 1) -> None:
        self.flow_removed_total += count

    def set_scheme(self, switch_id: int, host: int, scheme: MatchScheme, now: Optional[float] = None) -> List[FlowMod]:
        """
        Change the matching scheme of one destination at one switch and push the resulting flow_mods
        """
        now = self.now if now is None else now
        if self.suspended:
            raise SwitchUnreachable(switch_id, "controller suspended")
        current = self.policy.scheme_for(switch_id, host)
        if current == scheme:
            return []

        mods: List[FlowMod] = []
        sw = self.switches.get(switch_id)
        if scheme == MatchScheme.MMOS:
            fms_keys = sw.table.keys_for_host(host, MatchScheme.FMS) if sw is not None else []
            if fms_keys:
                mods.append(FlowMod.remove(switch_id, fms_keys))
            mods.append(FlowMod.add(switch_id, FlowKey.mmos(host), self.idle_timeout))
        else:
            mmos_key = FlowKey.mmos(host)
            if sw is not None and mmos_key in sw.table:
                mods.append(FlowMod.remove(switch_id, [mmos_key]))

        self.policy.set(switch_id, host, scheme)
        self._count_mods(mods, now)
        if self._channel is not None:
            for mod in mods:
                self._channel(mod)
        logger.info("t=%.3f switch %s host %x -> %s (%d mods)", now, switch_id, host, scheme.value, len(mods))
        return mods

    def controller_metrics(self, window: Optional[int] = None) -> ControllerStats:
        """Counters of one stats window; defaults to the window containing the current time."""
        if window is None:
            window = int(self.now // self.stats_window)
        stats = self._windows.get(window)
        if stats is None:
            return ControllerStats(
                window_index=window,
                window_start=window * self.stats_window,
                window_length=self.stats_window,
            )
        return stats.model_copy()

    def windows(self) -> List[ControllerStats]:
        return [self._windows[i].model_copy() for i in sorted(self._windows)]
