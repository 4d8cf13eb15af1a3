"""
Capacity-bounded flow table with MMOS and FMS match granularities.

Entries are kept in insertion order so that evictions, counts and any
derived output are deterministic.
"""
import logging
from typing import Dict, Iterable, List, Optional

from ..models.schemas import (
    DestFlowStats,
    FlowEntry,
    FlowKey,
    MatchResult,
    MatchScheme,
    PacketHeader,
)
from ..utils.errors import TableFull

logger = logging.getLogger(__name__)


class FlowTable:
    def __init__(self, f_cap: int, switch_id: int = 0):
        if f_cap <= 0:
            raise ValueError("f_cap must be positive")
        self.f_cap = f_cap
        self.switch_id = switch_id
        self.entries: Dict[FlowKey, FlowEntry] = {}
        # dest_host -> FMS keys, insertion ordered
        self._fms_by_dest: Dict[int, Dict[FlowKey, None]] = {}
        self._next_id = 1

    @property
    def f(self) -> int:
        return len(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: FlowKey) -> bool:
        return key in self.entries

    def get(self, key: FlowKey) -> Optional[FlowEntry]:
        return self.entries.get(key)

    def match_packet(self, pkt: PacketHeader, now: float) -> MatchResult:
        """
        Look the packet up; FMS entries shadow the MMOS entry of the same destination
        """
        entry = None
        if pkt.dst_mac in self._fms_by_dest:
            entry = self.entries.get(FlowKey.fms(pkt))
        if entry is None:
            entry = self.entries.get(FlowKey.mmos(pkt.dst_mac))
        if entry is None:
            return MatchResult(hit=False)

        entry.packet_count += 1
        entry.byte_count += pkt.size
        entry.last_matched = now
        return MatchResult(hit=True, entry_id=entry.entry_id)

    def install_entry(self, key: FlowKey, now: float, idle_timeout: float) -> int:
        existing = self.entries.get(key)
        if existing is not None:
            existing.last_matched = max(existing.last_matched, now)
            return existing.entry_id
        if self.f >= self.f_cap:
            raise TableFull(self.f_cap, self.switch_id)

        entry = FlowEntry(
            entry_id=self._next_id,
            match_key=key,
            dest_host=key.dest_host,
            install_time=now,
            last_matched=now,
            idle_timeout=idle_timeout,
        )
        self._next_id += 1
        self.entries[key] = entry
        if key.scheme == MatchScheme.FMS:
            self._fms_by_dest.setdefault(key.dest_host, {})[key] = None
        return entry.entry_id

    def _drop(self, key: FlowKey) -> FlowEntry:
        entry = self.entries.pop(key)
        if key.scheme == MatchScheme.FMS:
            keys = self._fms_by_dest[key.dest_host]
            del keys[key]
            if not keys:
                del self._fms_by_dest[key.dest_host]
        return entry

    def remove(self, keys: Iterable[FlowKey]) -> List[FlowEntry]:
        """Remove the given keys; unknown keys are ignored."""
        removed = []
        for key in keys:
            if key in self.entries:
                removed.append(self._drop(key))
        return removed

    def evict_idle(self, now: float) -> List[FlowEntry]:
        idle = [key for key, entry in self.entries.items() if entry.is_idle(now)]
        evicted = [self._drop(key) for key in idle]
        if evicted:
            logger.debug("switch %s evicted %d idle entries at t=%.3f", self.switch_id, len(evicted), now)
        return evicted

    def keys_for_host(self, host: int, scheme: Optional[MatchScheme] = None) -> List[FlowKey]:
        if scheme == MatchScheme.FMS:
            return list(self._fms_by_dest.get(host, {}))
        keys = [key for key in self.entries if key.dest_host == host]
        if scheme is not None:
            keys = [key for key in keys if key.scheme == scheme]
        return keys

    def dest_flow_counts(self) -> DestFlowStats:
        counts: Dict[int, int] = {}
        for key in self.entries:
            counts[key.dest_host] = counts.get(key.dest_host, 0) + 1
        pairs = sorted(counts.items())
        return DestFlowStats(switch_id=self.switch_id, pairs=pairs, f_i=self.f)
