"""OpenFlow-style reactive controller used as the comparison baseline."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .local import LatencyModel


@dataclass(frozen=True)
class BaselineConfig:
    service_rate: float = 10_000.0
    queue_capacity: int = 50_000
    rtt: LatencyModel = LatencyModel("lognormal", 4_000_000.0, 0.25)
    connection_timeout_ns: float = 1e9

    def __post_init__(self):
        if self.service_rate <= 0 or self.queue_capacity <= 0:
            raise ValueError("service rate and queue capacity must be positive")


class BaselineController:
    """FIFO PacketIn queue with deterministic service time ``1/mu``, then a FlowMod RTT."""

    def __init__(self, config: BaselineConfig = BaselineConfig(), rng=None):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.service_ns = 1e9 / config.service_rate
        self._departures = deque()
        self.arrivals = 0
        self.enqueued = 0
        self.dropped = 0
        self.max_queue = 0

    def queue_length(self, now):
        while self._departures and self._departures[0] <= now:
            self._departures.popleft()
        return len(self._departures)

    def packet_in(self, now) -> Optional[float]:
        """Time the resulting rule is installed, or None if the queue is full."""
        self.arrivals += 1
        q = self.queue_length(now)
        if q >= self.config.queue_capacity:
            self.dropped += 1
            return None
        start = max(now, self._departures[-1]) if self._departures else now
        done = start + self.service_ns
        self._departures.append(done)
        self.enqueued += 1
        self.max_queue = max(self.max_queue, q + 1)
        return done + self.config.rtt.sample(self.rng)

    def serviced(self, now):
        return self.enqueued - self.queue_length(now)
