import logging
from typing import Dict, List, Optional, Tuple

import networkx as nx
import numpy as np
from pydantic import BaseModel

from ..models.schemas import HostRole, TopologyConfig

logger = logging.getLogger(__name__)

MAC_BASE = 0x020000000000
IP_BASE = 0x0A000000  # 10.0.0.0


class Host(BaseModel):
    name: str
    role: HostRole
    mac: int
    ip: int
    switch_id: int
    office: Optional[int] = None


def format_mac(mac: int) -> str:
    return ":".join(f"{(mac >> shift) & 0xFF:02x}" for shift in range(40, -1, -8))


def format_ip(ip: int) -> str:
    return ".".join(str((ip >> shift) & 0xFF) for shift in (24, 16, 8, 0))


class Topology:
    """
    Enterprise network: one access switch per office and a chain of core
    switches. The server rack and the Internet gateway hang off the first
    core switch.
    """

    def __init__(self, config: TopologyConfig):
        self.config = config
        self.graph = nx.Graph()
        self.hosts: List[Host] = []
        self.by_mac: Dict[int, Host] = {}
        self._paths: Dict[Tuple[int, int], List[int]] = {}

        self.office_switches = list(range(1, config.n_offices + 1))
        self.core_switches = list(range(config.n_offices + 1, config.n_offices + 1 + config.n_core))
        self.switch_ids = self.office_switches + self.core_switches
        self.graph.add_nodes_from(self.switch_ids)

        for a, b in zip(self.core_switches, self.core_switches[1:]):
            self.graph.add_edge(a, b)
        for k, sw in enumerate(self.office_switches):
            self.graph.add_edge(sw, self.core_switches[k % config.n_core])

        gateway = self.core_switches[0]
        for k, sw in enumerate(self.office_switches):
            for i in range(config.hosts_per_office):
                self._add_host(f"c{k + 1}-{i + 1}", HostRole.CLIENT, sw, office=k + 1)
        for i in range(config.n_servers):
            self._add_host(f"srv{i + 1}", HostRole.SERVER, gateway)
        for i in range(config.n_internet_hosts):
            self._add_host(f"inet{i + 1}", HostRole.INTERNET, gateway)

        logger.debug(
            "topology: %d switches, %d hosts", len(self.switch_ids), len(self.hosts)
        )

    def _add_host(self, name: str, role: HostRole, switch_id: int, office: Optional[int] = None) -> None:
        index = len(self.hosts) + 1
        host = Host(
            name=name,
            role=role,
            mac=MAC_BASE + index,
            ip=IP_BASE + index,
            switch_id=switch_id,
            office=office,
        )
        self.hosts.append(host)
        self.by_mac[host.mac] = host

    def hosts_by_role(self, role: HostRole) -> List[Host]:
        return [h for h in self.hosts if h.role == role]

    @property
    def clients(self) -> List[Host]:
        return self.hosts_by_role(HostRole.CLIENT)

    @property
    def servers(self) -> List[Host]:
        return self.hosts_by_role(HostRole.SERVER)

    @property
    def internet_hosts(self) -> List[Host]:
        return self.hosts_by_role(HostRole.INTERNET)

    def host(self, mac: int) -> Host:
        return self.by_mac[mac]

    def path(self, src_mac: int, dst_mac: int) -> List[int]:
        """Switch ids traversed from the source host's switch to the destination's."""
        src = self.by_mac[src_mac].switch_id
        dst = self.by_mac[dst_mac].switch_id
        cached = self._paths.get((src, dst))
        if cached is None:
            cached = nx.shortest_path(self.graph, src, dst)
            self._paths[(src, dst)] = cached
        return cached

    def server_weights(self, exponent: float) -> np.ndarray:
        """Zipf popularity over the server rack; rank 1 is the first server."""
        ranks = np.arange(1, len(self.servers) + 1, dtype=float)
        weights = ranks ** -exponent
        return weights / weights.sum()


def build_topology(config: Optional[TopologyConfig] = None) -> Topology:
    return Topology(config or TopologyConfig())
