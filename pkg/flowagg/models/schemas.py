from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, List, Optional, Tuple
from enum import Enum

MAC_MAX = 2**48 - 1
IP_MAX = 2**32 - 1
PORT_MAX = 2**16 - 1


class MatchScheme(str, Enum):
    MMOS = "MMOS"
    FMS = "FMS"


class Proto(str, Enum):
    TCP = "TCP"
    UDP = "UDP"


class PacketFlag(str, Enum):
    NONE = "none"
    SYN = "SYN"
    ACK = "ACK"


class HostRole(str, Enum):
    CLIENT = "client"
    SERVER = "server"
    INTERNET = "internet"


class Health(str, Enum):
    HEALTHY = "Healthy"
    DEGRADED = "Degraded"
    DISCONNECTED = "Disconnected"


class ErrorKind(str, Enum):
    TABLE_FULL = "TableFull"
    FLOW_RULE_EXCEPTION = "FlowRuleException"
    CHANNEL_DISCONNECTED = "ChannelDisconnected"


class EventKind(str, Enum):
    EVICTION_SWEEP = "EvictionSweep"
    HEALTH_CHECK = "HealthCheck"
    FLOW_MOD = "FlowMod"
    FLOW_REMOVED = "FlowRemoved"
    PACKET_IN = "PacketIn"
    PACKET_ARRIVAL = "PacketArrival"
    OBSERVATION_TICK = "ObservationTick"

    @property
    def rank(self) -> int:
        return _EVENT_RANK[self]


_EVENT_RANK = {kind: rank for rank, kind in enumerate(EventKind)}


class PacketOutcome(str, Enum):
    FORWARDED = "forwarded"
    PACKET_IN = "packet_in"
    DROPPED = "dropped"


class FlowModOp(str, Enum):
    ADD = "add"
    REMOVE = "remove"


class AnalyzerMode(str, Enum):
    MMOS_ONLY = "MMOS_only"
    FMS_ONLY = "FMS_only"
    THRESHOLD = "Threshold"
    DATA = "DATA"


class Verdict(str, Enum):
    NORMAL = "normal"
    ATTACK = "attack"


# Packet and match models
class PacketHeader(BaseModel):
    model_config = ConfigDict(frozen=True)

    src_mac: int = Field(ge=0, le=MAC_MAX)
    dst_mac: int = Field(ge=0, le=MAC_MAX)
    src_ip: int = Field(ge=0, le=IP_MAX)
    dst_ip: int = Field(ge=0, le=IP_MAX)
    proto: Proto
    src_port: int = Field(ge=0, le=PORT_MAX)
    dst_port: int = Field(ge=0, le=PORT_MAX)
    flags: PacketFlag = PacketFlag.NONE
    size: int = Field(default=64, gt=0)
    timestamp: float = Field(ge=0)


class FlowKey(BaseModel):
    """
    Match key of one flow entry.

    MMOS keys carry only the destination MAC; FMS keys carry all seven
    header fields.
    """
    model_config = ConfigDict(frozen=True)

    scheme: MatchScheme
    dst_mac: int = Field(ge=0, le=MAC_MAX)
    src_mac: Optional[int] = None
    src_ip: Optional[int] = None
    dst_ip: Optional[int] = None
    proto: Optional[Proto] = None
    src_port: Optional[int] = None
    dst_port: Optional[int] = None

    @model_validator(mode="after")
    def check_fields_for_scheme(self):
        extra = (self.src_mac, self.src_ip, self.dst_ip, self.proto, self.src_port, self.dst_port)
        if self.scheme == MatchScheme.FMS and any(v is None for v in extra):
            raise ValueError("FMS key requires all seven header fields")
        if self.scheme == MatchScheme.MMOS and any(v is not None for v in extra):
            raise ValueError("MMOS key matches on destination MAC only")
        return self

    @classmethod
    def mmos(cls, dst_mac: int) -> "FlowKey":
        return cls(scheme=MatchScheme.MMOS, dst_mac=dst_mac)

    @classmethod
    def fms(cls, pkt: PacketHeader) -> "FlowKey":
        return cls(
            scheme=MatchScheme.FMS,
            dst_mac=pkt.dst_mac,
            src_mac=pkt.src_mac,
            src_ip=pkt.src_ip,
            dst_ip=pkt.dst_ip,
            proto=pkt.proto,
            src_port=pkt.src_port,
            dst_port=pkt.dst_port,
        )

    @classmethod
    def for_packet(cls, pkt: PacketHeader, scheme: MatchScheme) -> "FlowKey":
        if scheme == MatchScheme.MMOS:
            return cls.mmos(pkt.dst_mac)
        return cls.fms(pkt)

    @property
    def dest_host(self) -> int:
        return self.dst_mac

    def reversed(self) -> "FlowKey":
        if self.scheme == MatchScheme.MMOS:
            raise ValueError("MMOS keys have no direction")
        return FlowKey(
            scheme=MatchScheme.FMS,
            dst_mac=self.src_mac,
            src_mac=self.dst_mac,
            src_ip=self.dst_ip,
            dst_ip=self.src_ip,
            proto=self.proto,
            src_port=self.dst_port,
            dst_port=self.src_port,
        )


class FlowEntry(BaseModel):
    entry_id: int
    match_key: FlowKey
    dest_host: int
    packet_count: int = Field(default=0, ge=0)
    byte_count: int = Field(default=0, ge=0)
    install_time: float
    last_matched: float
    idle_timeout: float = Field(gt=0)

    def is_idle(self, now: float) -> bool:
        return now - self.last_matched >= self.idle_timeout


class MatchResult(BaseModel):
    hit: bool
    entry_id: Optional[int] = None


class DestFlowStats(BaseModel):
    """
    Per-switch destination statistics.

    `pairs` is the (host, entry count) form; `mmos_rates` is the
    (host, packets per second) form for hosts currently under MMOS.
    """
    switch_id: int
    pairs: List[Tuple[int, int]] = []
    f_i: int = Field(default=0, ge=0)
    mmos_rates: List[Tuple[int, float]] = []

    @model_validator(mode="after")
    def check_totals(self):
        if self.pairs and sum(count for _, count in self.pairs) != self.f_i:
            raise ValueError("entry counts must sum to f_i")
        if any(rate < 0 for _, rate in self.mmos_rates):
            raise ValueError("packet rates must be nonnegative")
        return self


# Controller messages
class FlowMod(BaseModel):
    op: FlowModOp
    switch_id: int
    keys: List[FlowKey]
    idle_timeout: Optional[float] = None

    @classmethod
    def add(cls, switch_id: int, key: FlowKey, idle_timeout: float) -> "FlowMod":
        return cls(op=FlowModOp.ADD, switch_id=switch_id, keys=[key], idle_timeout=idle_timeout)

    @classmethod
    def remove(cls, switch_id: int, keys: List[FlowKey]) -> "FlowMod":
        return cls(op=FlowModOp.REMOVE, switch_id=switch_id, keys=list(keys))

    @property
    def key(self) -> FlowKey:
        return self.keys[0]


class PacketIn(BaseModel):
    switch_id: int
    packet: PacketHeader
    time: float


class ErrorRecord(BaseModel):
    time: float
    kind: ErrorKind


class ControllerStats(BaseModel):
    window_index: int
    window_start: float
    window_length: float = Field(gt=0)
    packet_in_count: int = Field(default=0, ge=0)
    flow_mod_count: int = Field(default=0, ge=0)

    @property
    def packet_in_rate(self) -> float:
        return self.packet_in_count / self.window_length


class PolicyOverride(BaseModel):
    switch_id: int
    host: int
    scheme: MatchScheme


class PolicySnapshot(BaseModel):
    default_scheme: MatchScheme
    response_scheme: Optional[MatchScheme] = None
    overrides: List[PolicyOverride] = []


class PolicyAction(BaseModel):
    time: float
    switch_id: int
    host: int
    scheme: MatchScheme
    mods: int = 0


# Event trace
class SimEvent(BaseModel):
    time: float
    kind: EventKind
    switch_id: int = -1
    seq: int = 0

    def sort_key(self) -> Tuple[float, int, int, int]:
        return (self.time, self.kind.rank, self.switch_id, self.seq)


class TraceRecord(BaseModel):
    t: float
    switch: int
    kind: EventKind
    detail: str = ""


# Learning data
class ObservationSample(BaseModel):
    f: int = Field(ge=0)
    delta_f: int
    sign: Optional[int] = None
    switch_id: Optional[int] = None
    period_index: Optional[int] = None
    time: Optional[float] = None

    @model_validator(mode="after")
    def check_sign(self):
        if self.sign is not None and self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        return self


class SvmModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    w1: float
    w2: float
    b: float
    scale1: float = Field(gt=0)
    scale2: float = Field(gt=0)
    f_cap: Optional[int] = None
    converged: bool = True
    version: int = 1

    @property
    def w(self) -> Tuple[float, float]:
        return (self.w1, self.w2)


class FlowRecord(BaseModel):
    switch_id: int
    key: FlowKey
    packets: int = Field(ge=0)
    bytes: int = Field(ge=0)
    duration: float = Field(ge=0)


class FlowFeatureVector(BaseModel):
    avg_packets_per_flow: float = Field(ge=0)
    avg_bytes_per_flow: float = Field(ge=0)
    avg_duration_per_flow: float = Field(ge=0)
    pair_flow_ratio: float = Field(ge=0, le=1)

    def as_list(self) -> List[float]:
        return [
            self.avg_packets_per_flow,
            self.avg_bytes_per_flow,
            self.avg_duration_per_flow,
            self.pair_flow_ratio,
        ]


class SomGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    grid_size: int = Field(gt=0)
    dims: int = 4
    lo: List[float]
    hi: List[float]
    weights: List[List[float]]
    labels: List[Verdict]
    accuracy: float = 0.0
    flagged: bool = False
    version: int = 1

    @model_validator(mode="after")
    def check_shape(self):
        nodes = self.grid_size * self.grid_size
        if len(self.weights) != nodes or len(self.labels) != nodes:
            raise ValueError("weights and labels must cover every grid node")
        if any(len(row) != self.dims for row in self.weights):
            raise ValueError("weight vectors must match dims")
        return self


class IdsWindow(BaseModel):
    start: float
    end: float
    flows: int = 0
    features: Optional[FlowFeatureVector] = None
    verdict: Optional[Verdict] = None
    under_attack: bool = False


class AnalyzerRecord(BaseModel):
    time: float
    switch_id: int
    f: Optional[int] = None
    delta_f: Optional[int] = None
    verdict: Optional[int] = None
    actions: str = ""
    reachable: bool = True


# Configuration
class TopologyConfig(BaseModel):
    n_offices: int = Field(default=4, ge=1)
    hosts_per_office: int = Field(default=6, ge=1)
    n_servers: int = Field(default=6, ge=1)
    n_internet_hosts: int = Field(default=8, ge=0)
    n_core: int = Field(default=1, ge=1)


class TrafficMix(BaseModel):
    client_server: float = Field(default=0.6, ge=0, le=1)
    client_client: float = Field(default=0.2, ge=0, le=1)
    internet_server: float = Field(default=0.2, ge=0, le=1)

    @model_validator(mode="after")
    def check_sum(self):
        total = self.client_server + self.client_client + self.internet_server
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mix fractions must sum to 1, got {total}")
        return self

    def as_list(self) -> List[float]:
        return [self.client_server, self.client_client, self.internet_server]


class TrafficProfile(BaseModel):
    rate: float = Field(default=30.0, gt=0, description="Aggregate new-flow rate R (flows/s)")
    mix: TrafficMix = TrafficMix()
    duration: float = Field(default=120.0, gt=0)
    seed: int = Field(default=0, ge=0)
    response_probability: float = Field(default=1.0, ge=0, le=1)
    response_extra_packets: float = Field(default=2.0, ge=0)
    response_delay: float = Field(default=0.05, gt=0)
    response_gap: float = Field(default=0.2, gt=0)
    server_zipf: float = Field(default=1.0, ge=0)
    request_size: int = Field(default=512, gt=0)
    response_size: int = Field(default=1200, gt=0)

    @property
    def request_rate(self) -> float:
        return self.rate / (1.0 + self.response_probability)


class AttackProfile(BaseModel):
    attackers: List[int] = []
    victims: List[int] = []
    syn_rate: float = Field(default=10.0, gt=0)
    seed: int = Field(default=0, ge=0)
    packet_size: int = Field(default=60, gt=0)


class AttackConfig(BaseModel):
    """Attack settings inside an experiment; empty host lists are filled from the topology."""
    attackers: List[int] = []
    victims: List[int] = []
    syn_rate: float = Field(default=16.0, gt=0)
    start: float = Field(default=27.0, ge=0)
    duration: float = Field(default=63.0, gt=0)
    n_enterprise_attackers: int = Field(default=2, ge=0)
    n_internet_attackers: int = Field(default=2, ge=0)
    n_victims: int = Field(default=1, ge=1)


class AnalyzerConfig(BaseModel):
    observation_period: float = Field(default=3.0, gt=0)
    idle_timeout: float = Field(default=10.0, gt=0)
    f_cap: int = Field(default=300, gt=0)
    mode: AnalyzerMode = AnalyzerMode.DATA
    f_thres: Optional[float] = None
    response_scheme: Optional[MatchScheme] = None
    history: int = Field(default=64, gt=0)

    @model_validator(mode="after")
    def check_threshold(self):
        if self.mode == AnalyzerMode.THRESHOLD:
            if self.f_thres is None or not 0 < self.f_thres <= self.f_cap:
                raise ValueError("Threshold mode requires 0 < f_thres <= f_cap")
        return self


class SimulationConfig(BaseModel):
    ctrl_latency: float = Field(default=0.0, ge=0)
    sweep_interval: float = Field(default=1.0, gt=0)
    disconnect_delay: Optional[float] = Field(default=None, gt=0)
    disconnect_delay_range: Tuple[float, float, float] = (7.0, 8.0, 10.0)
    controller_suspend_after: int = Field(default=1, ge=1)
    ids_window_periods: int = Field(default=3, ge=1)
    trace: bool = False

    @model_validator(mode="after")
    def check_delay_range(self):
        lo, mode, hi = self.disconnect_delay_range
        if not 0 < lo <= mode <= hi:
            raise ValueError("disconnect_delay_range must satisfy 0 < low <= mode <= high")
        return self


class ExperimentConfig(BaseModel):
    name: str = "experiment"
    seed: int = Field(default=0, ge=0)
    duration: float = Field(default=120.0, gt=0)
    topology: TopologyConfig = TopologyConfig()
    analyzer: AnalyzerConfig = AnalyzerConfig()
    traffic: TrafficProfile = TrafficProfile()
    attack: Optional[AttackConfig] = None
    simulation: SimulationConfig = SimulationConfig()
    svm_model_path: Optional[str] = None
    ids_grid_path: Optional[str] = None
    output_dir: Optional[str] = None


# Results
class MetricsReport(BaseModel):
    name: str = ""
    config_hash: str = ""
    mode: AnalyzerMode
    rate: float
    seed: int
    duration: float
    series_interval: float = Field(default=1.0, gt=0)
    flow_entries: List[int] = []
    max_entries: Dict[int, int] = {}
    packet_in_total: int = 0
    packet_in_rate: float = Field(default=0.0, ge=0)
    operational_time: float = 0.0
    first_error: Dict[int, Optional[float]] = {}
    disconnect_times: Dict[int, float] = {}
    error_counts: Dict[ErrorKind, int] = {}
    suspended_at: Optional[float] = None
    offered: int = 0
    forwarded: int = 0
    dropped: int = 0
    pending: int = 0
    policy_actions: int = 0
    detection_rate: Optional[float] = None
    false_positive_rate: Optional[float] = None
    svm_converged: Optional[bool] = None

    @property
    def disconnections(self) -> int:
        return len(self.disconnect_times)

    @property
    def total_errors(self) -> int:
        return sum(self.error_counts.values())


# API models
class SimulationCreate(BaseModel):
    config: ExperimentConfig = ExperimentConfig()


class SimulationSession(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    id: int
    name: str
    mode: AnalyzerMode
    now: float
    duration: float
    finished: bool
    suspended: bool


class SwitchView(BaseModel):
    model_config = ConfigDict(from_attributes=True)

    switch_id: int
    health: Health
    f: int
    f_cap: int
    degraded_since: Optional[float] = None
    disconnect_delay: float
    errors: List[ErrorRecord] = []


class SchemeUpdate(BaseModel):
    scheme: MatchScheme
