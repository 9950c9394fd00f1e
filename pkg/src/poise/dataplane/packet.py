from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional

CONTEXT = "context"
DATA = "data"


class FlowKey(NamedTuple):
    sip: int
    sport: int
    proto: int

    def to_bytes(self) -> bytes:
        return self.sip.to_bytes(4, "big") + self.sport.to_bytes(2, "big") + self.proto.to_bytes(1, "big")

    @classmethod
    def from_bytes(cls, b: bytes):
        if len(b) != 7:
            raise ValueError("flow key is 7 bytes")
        return cls(int.from_bytes(b[:4], "big"), int.from_bytes(b[4:6], "big"), b[6])


@dataclass
class Packet:
    kind: str
    key: FlowKey
    ts: float
    size: int = 64
    dip: int = 0
    dport: int = 0
    ctx: Optional[Dict[str, int]] = None
    payload: bytes = b""
    flow: int = -1
    tag: str = ""
    recirc: int = 0

    @property
    def is_context(self):
        return self.kind == CONTEXT

    def fields(self):
        """Field values visible to the policy: built-ins plus the context stack."""
        out = {"sip": self.key.sip, "sport": self.key.sport, "proto": self.key.proto,
               "dip": self.dip, "dport": self.dport}
        if self.ctx:
            out.update(self.ctx)
        return out
