from __future__ import annotations

import math
from dataclasses import dataclass, fields

SECOND = 1_000_000_000


@dataclass(frozen=True)
class PipelineConfig:
    base_latency_ns: float = 400.0
    data_latency_ns: float = 88.0
    context_latency_ns: float = 100.4
    recirc_latency_ns: float = 750.0
    deadline_factor: float = 2.0
    bf_clear_interval_ns: int = 10 * SECOND
    bf_clear_duration_ns: int = 1_000
    scan_interval_ns: int = SECOND
    idle_timeout_ns: int = 60 * SECOND
    fullconn_capacity: int = 1 << 20
    cache_slots: int = 1 << 16
    bf_bits: int = 1 << 16
    bf_hashes: int = 3
    replace_prob: float = 0.5
    per_ip_cap: int = 1000

    def __post_init__(self):
        for name in ("base_latency_ns", "data_latency_ns", "context_latency_ns", "recirc_latency_ns"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.replace_prob <= 1.0:
            raise ValueError("replace_prob must be a probability")
        if self.cache_slots > 1 << 16:
            raise ValueError("cache is indexed by a 16-bit hash")

    def context_delay(self, rounds):
        """Context-path latency: one pass, or a full pass per recirculation round."""
        if rounds <= 1:
            return self.context_latency_ns
        return rounds * self.recirc_latency_ns

    def max_passes(self, expected_insert_ns):
        return max(1, math.ceil(self.deadline_factor * expected_insert_ns / self.recirc_latency_ns))

    @classmethod
    def from_mapping(cls, data):
        known = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown pipeline keys: {sorted(unknown)}")
        return cls(**data)
