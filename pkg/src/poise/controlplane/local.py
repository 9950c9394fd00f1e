"""Switch-local control plane: delayed FullConn installs."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class LatencyModel:
    """Insert/RTT latency: ``lognormal`` (median, sigma), ``constant`` or ``zero``."""
    kind: str = "lognormal"
    median_ns: float = 1_000_000.0
    sigma: float = 0.5

    def __post_init__(self):
        if self.kind not in ("lognormal", "constant", "zero"):
            raise ValueError(f"unknown latency kind {self.kind!r}")
        if self.median_ns < 0 or self.sigma < 0:
            raise ValueError("latency parameters must be non-negative")

    def sample(self, rng: np.random.Generator) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return float(self.median_ns)
        return float(rng.lognormal(math.log(self.median_ns), self.sigma))

    def mean(self) -> float:
        if self.kind == "zero":
            return 0.0
        if self.kind == "constant":
            return float(self.median_ns)
        return self.median_ns * math.exp(self.sigma ** 2 / 2)


ZERO_LATENCY = LatencyModel("zero")


@dataclass
class PendingInsert:
    key: object
    idx: int
    decision: object
    ready_at: float
    requested_at: float


class LocalControlPlane:
    """Allocates FullConn indices and installs entries once their latency elapses."""

    def __init__(self, state, latency: LatencyModel = LatencyModel(), rng=None):
        self.state = state
        self.latency = latency
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.pending = {}
        self._heap = []
        self._seq = 0
        self.requested = 0
        self.coalesced = 0
        self.refused = 0
        self.committed = 0

    @property
    def instantaneous(self):
        return self.latency.kind == "zero"

    def request_insert(self, key, decision, now) -> Optional[PendingInsert]:
        p = self.pending.get(key)
        if p is not None:
            # later context for a flow still being installed: keep its newest decision
            p.decision = decision
            self.coalesced += 1
            return p
        idx = self.state.alloc_index()
        if idx is None:
            self.refused += 1
            return None
        self.requested += 1
        p = PendingInsert(key, idx, decision, now + self.latency.sample(self.rng), now)
        self.pending[key] = p
        heapq.heappush(self._heap, (p.ready_at, self._seq, key))
        self._seq += 1
        return p

    def next_ready(self):
        return self._heap[0][0] if self._heap else None

    def commit_ready(self, now) -> int:
        n = 0
        while self._heap and self._heap[0][0] <= now:
            _, _, key = heapq.heappop(self._heap)
            p = self.pending.pop(key)
            self.state.install(key, p.idx, p.decision, now)
            n += 1
        self.committed += n
        return n

    def outstanding(self):
        return len(self.pending)
