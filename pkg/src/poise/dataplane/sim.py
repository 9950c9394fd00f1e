"""Deterministic discrete-event simulation of one switch over a packet trace."""
from __future__ import annotations

import copy
import heapq
import json
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from ..controlplane.baseline import BaselineConfig
from ..controlplane.local import LatencyModel
from ..lang.syntax import Fwd
from .config import SECOND, PipelineConfig
from .switch import BaselineSwitch, PoiseSwitch


class VerdictRecord(NamedTuple):
    flow: int
    tag: str
    kind: str
    sip: int
    sport: int
    proto: int
    ts_in: float
    ts_out: float
    verdict: str
    port: object
    reason: str
    passes: int
    size: int


class DecisionRecord(NamedTuple):
    flow: int
    tag: str
    sip: int
    sport: int
    proto: int
    ts_in: float
    ts_commit: float
    verdict: str
    port: object


def verdict_name(action):
    return "fwd" if isinstance(action, Fwd) else str(action)


@dataclass
class SimResult:
    records: List[VerdictRecord]
    decisions: List[DecisionRecord]
    counters: dict
    horizon: float
    packets_in: int
    in_flight: int = 0
    occupancy: list = field(default_factory=list)

    def data(self):
        return [r for r in self.records if r.kind == "data"]


class Simulator:
    """Event loop ordered by (time, insertion order)."""

    def __init__(self, program, mode="poise", config: PipelineConfig = PipelineConfig(),
                 insert_latency: LatencyModel = LatencyModel(),
                 baseline: BaselineConfig = BaselineConfig(),
                 seed=0, log_sink=None, drain_ns: float = 1.5 * SECOND,
                 sample_interval_ns: Optional[float] = None):
        self.program = program
        self.mode = mode
        self.config = config
        self.drain_ns = drain_ns
        self.sample_interval_ns = sample_interval_ns
        ss = np.random.SeedSequence(seed)
        cache_ss, cp_ss = ss.spawn(2)
        if mode == "poise":
            self.switch = PoiseSwitch(self, program, config, insert_latency,
                                      np.random.default_rng(cache_ss), np.random.default_rng(cp_ss), log_sink)
        elif mode == "baseline":
            self.switch = BaselineSwitch(self, program, config, baseline, np.random.default_rng(cp_ss), log_sink)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        self._heap = []
        self._seq = 0
        self.now = 0.0
        self.records = []
        self.decisions = []
        self.occupancy = []

    def schedule(self, t, fn, *args):
        heapq.heappush(self._heap, (t, self._seq, fn, args))
        self._seq += 1

    # callbacks from the switch
    def verdict(self, pkt, t_out, dec, reason):
        a = dec.action
        self.records.append(VerdictRecord(pkt.flow, pkt.tag, pkt.kind, pkt.key.sip, pkt.key.sport,
                                          pkt.key.proto, pkt.ts, t_out, verdict_name(a),
                                          getattr(a, "port", None), reason, pkt.recirc, pkt.size))

    def consume(self, pkt, t_out, reason):
        self.records.append(VerdictRecord(pkt.flow, pkt.tag, pkt.kind, pkt.key.sip, pkt.key.sport,
                                          pkt.key.proto, pkt.ts, t_out, "consumed", None, reason, 0, pkt.size))

    def decision(self, pkt, ingress, commit, dec):
        a = dec.action
        self.decisions.append(DecisionRecord(pkt.flow, pkt.tag, pkt.key.sip, pkt.key.sport, pkt.key.proto,
                                             ingress, commit, verdict_name(a), getattr(a, "port", None)))

    def _arrive(self, pkt, now):
        self.switch.on_packet(pkt, now)

    def _periodic(self, interval, fn, now):
        fn(now)
        if now + interval <= self.horizon:
            self.schedule(now + interval, self._periodic, interval, fn)

    def _sample(self, now):
        st = getattr(self.switch, "state", None)
        if st is not None:
            fc, cache = st.occupancy()
        else:
            fc, cache = len(self.switch.rules), 0
        self.occupancy.append((now, fc, cache))
        if now + self.sample_interval_ns <= self.horizon:
            self.schedule(now + self.sample_interval_ns, self._sample)

    def run(self, trace, horizon=None) -> SimResult:
        # packets carry per-run state (recirculation count), so each run gets copies
        packets = [copy.copy(e.packet if hasattr(e, "packet") else e) for e in trace]
        last = max((p.ts for p in packets), default=0.0)
        self.horizon = horizon if horizon is not None else last + self.drain_ns
        for p in packets:
            self.schedule(p.ts, self._arrive, p)
        for interval, fn in self.switch.periodic():
            if interval <= self.horizon:
                self.schedule(interval, self._periodic, interval, fn)
        if self.sample_interval_ns:
            self.schedule(0.0, self._sample)
        heap = self._heap
        while heap:
            t, _, fn, args = heapq.heappop(heap)
            if t > self.horizon:
                heapq.heappush(heap, (t, -1, fn, args))
                break
            self.now = t
            fn(*args, t)
        in_flight = len(packets) - len(self.records)
        return SimResult(self.records, self.decisions, self.switch.counters(), self.horizon,
                         len(packets), in_flight, self.occupancy)


def simulate(program, trace, mode="poise", **kwargs) -> SimResult:
    return Simulator(program, mode, **kwargs).run(trace)


def write_verdict_log(result: SimResult, path):
    with open(path, "w") as fh:
        for r in result.records:
            fh.write(json.dumps(r._asdict(), sort_keys=True) + "\n")
