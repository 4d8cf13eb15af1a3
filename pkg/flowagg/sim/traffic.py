"""
Seeded traffic schedules: background enterprise traffic and SYN floods.

Schedules are plain time-ordered lists of PacketHeader and are pure
functions of (profile, topology, seed).
"""
import heapq
import logging
from typing import Dict, Iterable, List, Tuple

import numpy as np
import pandas as pd

from ..models.schemas import (
    AttackConfig,
    AttackProfile,
    PacketFlag,
    PacketHeader,
    Proto,
    TrafficProfile,
)
from ..utils.rng import stream
from .topology import Host, Topology

logger = logging.getLogger(__name__)

SERVER_PORT = 80
PEER_PORT = 445
EPHEMERAL_LOW = 1024
EPHEMERAL_HIGH = 65535

SCHEDULE_COLUMNS = [
    "time", "src_mac", "dst_mac", "src_ip", "dst_ip",
    "proto", "src_port", "dst_port", "flags", "size",
]


class PortAllocator:
    """Fresh source port per new flow, per host."""

    def __init__(self):
        self._next: Dict[int, int] = {}

    def take(self, mac: int) -> int:
        port = self._next.get(mac, EPHEMERAL_LOW)
        self._next[mac] = port + 1 if port < EPHEMERAL_HIGH else EPHEMERAL_LOW
        return port


def arrival_times(rng: np.random.Generator, rate: float, duration: float) -> np.ndarray:
    """Poisson arrivals on [0, duration) from inverse-CDF exponential gaps."""
    chunk = max(16, int(rate * duration * 1.2))
    times = []
    t = 0.0
    while t < duration:
        gaps = -np.log1p(-rng.random(chunk)) / rate
        block = t + np.cumsum(gaps)
        times.append(block)
        t = block[-1]
    out = np.concatenate(times) if times else np.empty(0)
    return out[out < duration]


def _packet(src: Host, dst: Host, src_port: int, dst_port: int, flags: PacketFlag, size: int, t: float) -> PacketHeader:
    return PacketHeader(
        src_mac=src.mac,
        dst_mac=dst.mac,
        src_ip=src.ip,
        dst_ip=dst.ip,
        proto=Proto.TCP,
        src_port=src_port,
        dst_port=dst_port,
        flags=flags,
        size=size,
        timestamp=t,
    )


def _sorted(packets: List[Tuple[float, int, PacketHeader]]) -> List[PacketHeader]:
    packets.sort(key=lambda item: (item[0], item[1]))
    return [pkt for _, _, pkt in packets]


def generate_schedule(profile: TrafficProfile, topology: Topology) -> List[PacketHeader]:
    rng = stream(profile.seed, "traffic")
    clients = topology.clients
    servers = topology.servers
    internet = topology.internet_hosts
    popularity = topology.server_weights(profile.server_zipf)
    mix = np.asarray(profile.mix.as_list())
    if not internet:
        mix = np.array([mix[0] + mix[2], mix[1], 0.0])

    times = arrival_times(rng, profile.request_rate, profile.duration)
    categories = rng.choice(3, size=len(times), p=mix)
    ports = PortAllocator()
    packets: List[Tuple[float, int, PacketHeader]] = []
    seq = 0

    for t, category in zip(times, categories):
        t = float(t)
        if category == 0:
            src = clients[rng.integers(len(clients))]
            dst = servers[rng.choice(len(servers), p=popularity)]
            dst_port = SERVER_PORT
        elif category == 1:
            src = clients[rng.integers(len(clients))]
            peers = [c for c in clients if c.office != src.office] or [c for c in clients if c.mac != src.mac]
            dst = peers[rng.integers(len(peers))]
            dst_port = PEER_PORT
        else:
            src = internet[rng.integers(len(internet))]
            dst = servers[rng.choice(len(servers), p=popularity)]
            dst_port = SERVER_PORT

        src_port = ports.take(src.mac)
        packets.append((t, seq, _packet(src, dst, src_port, dst_port, PacketFlag.SYN, profile.request_size, t)))
        seq += 1

        if rng.random() >= profile.response_probability:
            continue
        n_resp = 1 + int(rng.poisson(profile.response_extra_packets))
        rt = t + float(rng.exponential(profile.response_delay))
        for k in range(n_resp):
            if k:
                rt += float(rng.exponential(profile.response_gap))
            if rt >= profile.duration:
                break
            packets.append((rt, seq, _packet(dst, src, dst_port, src_port, PacketFlag.ACK, profile.response_size, rt)))
            seq += 1

    schedule = _sorted(packets)
    logger.debug("generated %d packets (%d flows) for R=%s", len(schedule), len(times), profile.rate)
    return schedule


def generate_attack(profile: AttackProfile, start: float, duration: float, topology: Topology) -> List[PacketHeader]:
    """SYN flood from every attacker against the victim servers, fresh source port per packet."""
    if not profile.attackers or not profile.victims:
        return []
    rng = stream(profile.seed, "attack")
    attackers = [topology.host(mac) for mac in profile.attackers]
    victims = [topology.host(mac) for mac in profile.victims]
    ports = PortAllocator()

    packets = []
    for seq, offset in enumerate(arrival_times(rng, profile.syn_rate, duration)):
        t = start + float(offset)
        src = attackers[rng.integers(len(attackers))]
        dst = victims[rng.integers(len(victims))]
        pkt = _packet(src, dst, ports.take(src.mac), SERVER_PORT, PacketFlag.SYN, profile.packet_size, t)
        packets.append((t, seq, pkt))
    return _sorted(packets)


def resolve_attack(config: AttackConfig, topology: Topology, seed: int) -> AttackProfile:
    """Fill attacker and victim sets left empty in the config."""
    attackers = list(config.attackers)
    if not attackers:
        office = 2 if topology.config.n_offices > 1 else 1
        office_hosts = [h for h in topology.clients if h.office == office]
        attackers += [h.mac for h in office_hosts[: config.n_enterprise_attackers]]
        attackers += [h.mac for h in topology.internet_hosts[: config.n_internet_attackers]]
    victims = list(config.victims) or [h.mac for h in topology.servers[: config.n_victims]]
    return AttackProfile(attackers=attackers, victims=victims, syn_rate=config.syn_rate, seed=seed)


def merge_schedules(*schedules: Iterable[PacketHeader]) -> List[PacketHeader]:
    return list(heapq.merge(*schedules, key=lambda pkt: pkt.timestamp))


def schedule_to_frame(packets: List[PacketHeader]) -> pd.DataFrame:
    rows = [
        (p.timestamp, p.src_mac, p.dst_mac, p.src_ip, p.dst_ip, p.proto.value,
         p.src_port, p.dst_port, p.flags.value, p.size)
        for p in packets
    ]
    return pd.DataFrame(rows, columns=SCHEDULE_COLUMNS)


def write_schedule(packets: List[PacketHeader], path: str) -> None:
    schedule_to_frame(packets).to_csv(path, index=False, lineterminator="\n")


def read_schedule(path: str) -> List[PacketHeader]:
    frame = pd.read_csv(path, dtype={"proto": str, "flags": str}, keep_default_na=False, float_precision="round_trip")
    missing = [c for c in SCHEDULE_COLUMNS if c not in frame.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    return [
        PacketHeader(
            src_mac=int(row.src_mac), dst_mac=int(row.dst_mac),
            src_ip=int(row.src_ip), dst_ip=int(row.dst_ip),
            proto=Proto(row.proto), src_port=int(row.src_port), dst_port=int(row.dst_port),
            flags=PacketFlag(row.flags), size=int(row.size), timestamp=float(row.time),
        )
        for row in frame.itertuples(index=False)
    ]
