import threading
from collections import deque
from typing import Deque, Dict, List, Optional, Tuple

from ..models.schemas import (
    AnalyzerRecord,
    MatchScheme,
    ObservationSample,
    PolicySnapshot,
    SvmModel,
)


class SharedDatabase:
    """
    Store shared by the Statistics Collector and the Analyzer.

    Writes are serialized through one lock; readers get copies.
    """

    def __init__(self, history: int = 64, model: Optional[SvmModel] = None):
        self._lock = threading.RLock()
        self.history = history
        self.model = model
        self._samples: Dict[int, Deque[ObservationSample]] = {}
        self._policy: Dict[Tuple[int, int], MatchScheme] = {}
        self._default_scheme: Optional[MatchScheme] = None
        self._rates: Dict[int, Dict[int, float]] = {}
        self._gaps: List[Tuple[float, int, str]] = []
        self._log: List[AnalyzerRecord] = []

    # Samples
    def add_sample(self, switch_id: int, sample: ObservationSample) -> None:
        with self._lock:
            ring = self._samples.setdefault(switch_id, deque(maxlen=self.history))
            ring.append(sample)

    def samples(self, switch_id: int) -> List[ObservationSample]:
        with self._lock:
            return list(self._samples.get(switch_id, ()))

    def latest(self, switch_id: int) -> Optional[ObservationSample]:
        with self._lock:
            ring = self._samples.get(switch_id)
            return ring[-1] if ring else None

    # Policy view
    def sync_policy(self, snapshot: PolicySnapshot) -> None:
        with self._lock:
            self._default_scheme = snapshot.default_scheme
            self._policy = {(o.switch_id, o.host): o.scheme for o in snapshot.overrides}

    def matches(self, snapshot: PolicySnapshot) -> bool:
        view = {(o.switch_id, o.host): o.scheme for o in snapshot.overrides}
        with self._lock:
            return self._default_scheme == snapshot.default_scheme and self._policy == view

    # Packet rates of MMOS hosts
    def record_rates(self, switch_id: int, rates: List[Tuple[int, float]]) -> None:
        """Replace the R_pkt counters of one switch with the latest collection."""
        with self._lock:
            self._rates[switch_id] = dict(rates)

    def mmos_rates(self, switch_id: int) -> List[Tuple[int, float]]:
        with self._lock:
            return sorted(self._rates.get(switch_id, {}).items())

    # Analyzer log and gaps
    def record_gap(self, time: float, switch_id: int, reason: str) -> None:
        with self._lock:
            self._gaps.append((time, switch_id, reason))

    def gaps(self) -> List[Tuple[float, int, str]]:
        with self._lock:
            return list(self._gaps)

    def log(self, record: AnalyzerRecord) -> None:
        with self._lock:
            self._log.append(record)

    def analyzer_log(self) -> List[AnalyzerRecord]:
        with self._lock:
            return list(self._log)


# In-memory storage of API simulation sessions
sessions_db: Dict[int, object] = {}
session_id_counter = 1
