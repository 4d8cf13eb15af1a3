from typing import Dict, List

import numpy as np

from flowagg.models.schemas import (
    FlowFeatureVector,
    FlowMod,
    PacketFlag,
    PacketHeader,
    PacketIn,
    Proto,
    Verdict,
)
from flowagg.sim.controller import AggregationPolicy, ReactiveForwarding
from flowagg.sim.dataplane import SwitchState, apply_flow_mod

HOST_A = 0x020000000001
HOST_B = 0x020000000002
HOST_C = 0x020000000003
SERVER = 0x0200000000AA


def make_packet(
    src_port: int = 1024,
    dst_mac: int = SERVER,
    src_mac: int = HOST_A,
    dst_port: int = 80,
    flags: PacketFlag = PacketFlag.SYN,
    size: int = 100,
    t: float = 0.0,
) -> PacketHeader:
    return PacketHeader(
        src_mac=src_mac,
        dst_mac=dst_mac,
        src_ip=0x0A000000 + (src_mac & 0xFFFF),
        dst_ip=0x0A000000 + (dst_mac & 0xFFFF),
        proto=Proto.TCP,
        src_port=src_port,
        dst_port=dst_port,
        flags=flags,
        size=size,
        timestamp=t,
    )


class Fabric:
    """Switches wired to a controller without the event loop; flow_mods apply at `now`."""

    def __init__(self, switch_ids=(1,), f_cap: int = 300, default=None):
        policy = AggregationPolicy(default) if default is not None else AggregationPolicy()
        self.controller = ReactiveForwarding(policy, idle_timeout=10.0, stats_window=3.0)
        self.switches: Dict[int, SwitchState] = {i: SwitchState(i, f_cap) for i in switch_ids}
        self.sent: List[FlowMod] = []
        self.now = 0.0
        self.controller.attach(self.switches, self._channel)

    def _channel(self, mod: FlowMod) -> None:
        self.sent.append(mod)
        apply_flow_mod(self.switches[mod.switch_id], mod, self.now)

    def fill(self, switch_id: int, dst_mac: int, count: int, first_port: int = 1024) -> None:
        """Install `count` entries for `dst_mac` through the packet_in path."""
        sw = self.switches[switch_id]
        for port in range(first_port, first_port + count):
            pkt = make_packet(src_port=port, dst_mac=dst_mac, t=self.now)
            mod = self.controller.handle_packet_in(PacketIn(switch_id=switch_id, packet=pkt, time=self.now))
            apply_flow_mod(sw, mod, self.now)


def cluster_samples(n: int = 40, seed: int = 3):
    """Two well separated feature clusters: long paired flows vs one-packet unpaired ones."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        samples.append((FlowFeatureVector(
            avg_packets_per_flow=float(rng.uniform(3.0, 5.0)),
            avg_bytes_per_flow=float(rng.uniform(2500.0, 4000.0)),
            avg_duration_per_flow=float(rng.uniform(0.4, 1.0)),
            pair_flow_ratio=float(rng.uniform(0.8, 1.0)),
        ), Verdict.NORMAL))
        samples.append((FlowFeatureVector(
            avg_packets_per_flow=float(rng.uniform(0.0, 0.5)),
            avg_bytes_per_flow=float(rng.uniform(0.0, 100.0)),
            avg_duration_per_flow=float(rng.uniform(0.0, 0.05)),
            pair_flow_ratio=float(rng.uniform(0.0, 0.3)),
        ), Verdict.ATTACK))
    return samples
