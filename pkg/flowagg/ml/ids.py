"""
Flow-statistics intrusion detection.

Per detection window the flow records gathered from the switches are
reduced to four features (average packets, bytes and duration per flow,
and the pair-flow ratio) and classified with a labelled self-organizing map.
"""
import json
import logging
import math
from typing import AbstractSet, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..models.schemas import (
    FlowEntry,
    FlowFeatureVector,
    FlowRecord,
    Health,
    IdsWindow,
    MatchScheme,
    SomGrid,
    Verdict,
)
from ..utils.errors import DegenerateData, EmptyWindow, ModelFormatError
from ..utils.rng import stream

logger = logging.getLogger(__name__)

FEATURE_COLUMNS = ["avg_packets_per_flow", "avg_bytes_per_flow", "avg_duration_per_flow", "pair_flow_ratio"]


def flow_record(switch_id: int, entry: FlowEntry) -> FlowRecord:
    return FlowRecord(
        switch_id=switch_id,
        key=entry.match_key,
        packets=entry.packet_count,
        bytes=entry.byte_count,
        duration=entry.last_matched - entry.install_time,
    )


def extract_features(
    records: Sequence[FlowRecord],
    aggregated: Optional[AbstractSet[Tuple[int, int]]] = None,
) -> FlowFeatureVector:
    """
    Average the window's flow records into one feature vector.

    A full-match record is paired when its reverse was recorded, or when the
    reverse direction falls into an aggregate at the switch that recorded it:
    `aggregated` holds the (switch, destination) pairs matched by MMOS entries
    during the window and defaults to those among `records`.
    """
    if not records:
        raise EmptyWindow("no flow records in window")
    if aggregated is None:
        aggregated = {(r.switch_id, r.key.dst_mac) for r in records if r.key.scheme == MatchScheme.MMOS}
    fms_keys = {r.key for r in records if r.key.scheme == MatchScheme.FMS}

    def is_paired(r: FlowRecord) -> bool:
        # an aggregated record has no direction and counts as paired
        if r.key.scheme == MatchScheme.MMOS:
            return True
        return r.key.reversed() in fms_keys or (r.switch_id, r.key.src_mac) in aggregated

    paired = sum(1 for r in records if is_paired(r))
    n = len(records)
    return FlowFeatureVector(
        avg_packets_per_flow=sum(r.packets for r in records) / n,
        avg_bytes_per_flow=sum(r.bytes for r in records) / n,
        avg_duration_per_flow=sum(r.duration for r in records) / n,
        pair_flow_ratio=paired / n,
    )


# Self-organizing map
def _normalize(X: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    return np.clip((X - lo) / span, 0.0, 1.0)


def _bmu(weights: np.ndarray, x: np.ndarray) -> int:
    return int(np.argmin(((weights - x) ** 2).sum(axis=1)))


def som_train(
    samples: Sequence[Tuple[FlowFeatureVector, Verdict]],
    grid_size: int = 8,
    epochs: int = 500,
    seed: int = 0,
    learning_rate: float = 0.5,
    radius: Optional[float] = None,
) -> SomGrid:
    """
    Fit an m x m map on labelled feature vectors, then label each node by
    majority vote of the samples mapped to it. Nodes without samples take
    the label of the nearest labelled node.
    """
    labels = [label for _, label in samples]
    if len(set(labels)) < 2:
        raise DegenerateData("SOM training needs both normal and attack samples")

    X = np.array([vec.as_list() for vec, _ in samples], dtype=float)
    lo, hi = X.min(axis=0), X.max(axis=0)
    Xn = _normalize(X, lo, hi)
    y = np.array([label == Verdict.ATTACK for label in labels])

    rng = stream(seed, "som")
    nodes = grid_size * grid_size
    weights = rng.random((nodes, X.shape[1]))
    coords = np.array([(r, c) for r in range(grid_size) for c in range(grid_size)], dtype=float)

    radius0 = radius if radius is not None else grid_size / 2.0
    tau = epochs / math.log(radius0) if radius0 > 1 else float(epochs)
    for epoch in range(epochs):
        rate = learning_rate * math.exp(-epoch / epochs)
        sigma = max(radius0 * math.exp(-epoch / tau), 0.5)
        for idx in rng.permutation(len(Xn)):
            x = Xn[idx]
            winner = _bmu(weights, x)
            dist2 = ((coords - coords[winner]) ** 2).sum(axis=1)
            influence = np.exp(-dist2 / (2.0 * sigma * sigma))
            weights += rate * influence[:, None] * (x - weights)

    attack_votes = np.zeros(nodes, dtype=int)
    normal_votes = np.zeros(nodes, dtype=int)
    bmus = np.array([_bmu(weights, x) for x in Xn])
    for node, is_attack in zip(bmus, y):
        if is_attack:
            attack_votes[node] += 1
        else:
            normal_votes[node] += 1

    node_labels: List[Optional[Verdict]] = []
    for a, n in zip(attack_votes, normal_votes):
        if a == 0 and n == 0:
            node_labels.append(None)
        else:
            node_labels.append(Verdict.ATTACK if a >= n else Verdict.NORMAL)

    labelled = [i for i, label in enumerate(node_labels) if label is not None]
    for i, label in enumerate(node_labels):
        if label is None:
            nearest = min(labelled, key=lambda j: (((weights[j] - weights[i]) ** 2).sum(), j))
            node_labels[i] = node_labels[nearest]

    predicted = np.array([node_labels[b] == Verdict.ATTACK for b in bmus])
    acc = float((predicted == y).mean())
    flagged = acc <= 0.5
    if flagged:
        logger.warning("SOM training accuracy %.1f%% is no better than chance", acc * 100)
    else:
        logger.info("SOM trained on %d samples, accuracy %.1f%%", len(y), acc * 100)

    return SomGrid(
        grid_size=grid_size,
        dims=X.shape[1],
        lo=lo.tolist(),
        hi=hi.tolist(),
        weights=weights.tolist(),
        labels=node_labels,
        accuracy=acc,
        flagged=flagged,
    )


def detect(grid: SomGrid, x: FlowFeatureVector) -> Verdict:
    weights = np.asarray(grid.weights)
    xn = _normalize(np.asarray(x.as_list()), np.asarray(grid.lo), np.asarray(grid.hi))
    return grid.labels[_bmu(weights, xn)]


def detection_rate(verdicts: Sequence[Optional[Verdict]]) -> float:
    """Share of attack windows flagged, in percent; missing verdicts count as missed."""
    if not verdicts:
        return 0.0
    return 100.0 * sum(1 for v in verdicts if v == Verdict.ATTACK) / len(verdicts)


def false_positive_rate(verdicts: Sequence[Optional[Verdict]]) -> float:
    """Share of normal windows flagged as attacks, in percent; missed windows are not counted."""
    judged = [v for v in verdicts if v is not None]
    if not judged:
        return 0.0
    return 100.0 * sum(1 for v in judged if v == Verdict.ATTACK) / len(judged)


# Persistence
def save_grid(grid: SomGrid, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(grid.model_dump(mode="json"), fh, sort_keys=True)
        fh.write("\n")


def load_grid(path: str) -> SomGrid:
    try:
        with open(path, encoding="utf-8") as fh:
            return SomGrid.model_validate_json(fh.read())
    except ValidationError as exc:
        raise ModelFormatError(path, str(exc)) from exc


def write_features(samples: Sequence[Tuple[FlowFeatureVector, Verdict]], path: str) -> None:
    rows = [vec.as_list() + [label.value] for vec, label in samples]
    frame = pd.DataFrame(rows, columns=FEATURE_COLUMNS + ["label"])
    frame.to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def read_features(path: str) -> List[Tuple[FlowFeatureVector, Verdict]]:
    frame = pd.read_csv(path)
    missing = [c for c in FEATURE_COLUMNS + ["label"] if c not in frame.columns]
    if missing:
        raise ModelFormatError(path, f"missing columns {missing}")
    return [
        (FlowFeatureVector(**{c: float(getattr(row, c)) for c in FEATURE_COLUMNS}), Verdict(row.label))
        for row in frame.itertuples(index=False)
    ]


class IdsMonitor:
    """
    Network-wide collector feeding the detector once per detection window.

    Every flow entry is reported once: in the first window where it is seen
    live (matched or installed during the window) or removed.
    """

    def __init__(
        self,
        simulator,
        window: float,
        grid: Optional[SomGrid] = None,
        attack_interval: Optional[Tuple[float, float]] = None,
    ):
        self.simulator = simulator
        self.window = window
        self.grid = grid
        self.attack_interval = attack_interval
        self.windows: List[IdsWindow] = []
        self._start = 0.0
        self._removed: List[Tuple[int, FlowEntry]] = []
        self._reported: set = set()
        simulator.on_flow_removed(self._on_removed)
        simulator.on_tick(self._on_tick)

    def _on_removed(self, switch_id: int, entry: FlowEntry, now: float) -> None:
        self._removed.append((switch_id, entry))

    def _on_tick(self, now: float) -> None:
        if now - self._start >= self.window - 1e-9:
            self.close_window(now)

    def _gather(self, start: float) -> Tuple[List[FlowRecord], Set[Tuple[int, int]]]:
        records: Dict = {}
        aggregated: Set[Tuple[int, int]] = set()

        def offer(switch_id: int, entry: FlowEntry) -> None:
            if entry.match_key.scheme == MatchScheme.MMOS:
                aggregated.add((switch_id, entry.dest_host))
            ident = (switch_id, entry.entry_id)
            if ident in self._reported:
                return
            self._reported.add(ident)
            record = flow_record(switch_id, entry)
            best = records.get(record.key)
            if best is None or record.packets > best.packets:
                records[record.key] = record

        for switch_id, entry in self._removed:
            offer(switch_id, entry)
        for switch_id, sw in self.simulator.switches.items():
            if sw.health == Health.DISCONNECTED:
                continue
            for entry in sw.table.entries.values():
                if entry.last_matched >= start:
                    offer(switch_id, entry)
        return list(records.values()), aggregated

    def close_window(self, now: float) -> IdsWindow:
        start, self._start = self._start, now
        mid = (start + now) / 2.0
        under_attack = (
            self.attack_interval is not None
            and self.attack_interval[0] <= mid < self.attack_interval[1]
        )
        window = IdsWindow(start=start, end=now, under_attack=under_attack)

        if self.simulator.controller.suspended:
            # statistics unavailable: the window is missed
            self._removed.clear()
            self.windows.append(window)
            return window

        records, aggregated = self._gather(start)
        self._removed.clear()
        window.flows = len(records)
        try:
            window.features = extract_features(records, aggregated)
        except EmptyWindow:
            # no traffic crossed the network: nothing to flag
            window.verdict = Verdict.NORMAL
        else:
            if self.grid is not None:
                window.verdict = detect(self.grid, window.features)
        logger.debug("ids window [%.1f, %.1f): %d flows, verdict %s", start, now, len(records), window.verdict)
        self.windows.append(window)
        return window

    def attack_verdicts(self) -> List[Optional[Verdict]]:
        return [w.verdict for w in self.windows if w.under_attack]

    def normal_verdicts(self) -> List[Optional[Verdict]]:
        return [w.verdict for w in self.windows if not w.under_attack]

    def labelled_samples(self) -> List[Tuple[FlowFeatureVector, Verdict]]:
        return [
            (w.features, Verdict.ATTACK if w.under_attack else Verdict.NORMAL)
            for w in self.windows
            if w.features is not None
        ]
