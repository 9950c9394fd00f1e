"""Seeded packet-trace generation and trace files."""
from .context import encode_context_packet, pack_context, unpack_context
from .io import TraceFormatError, read_trace, write_trace
from .traces import (
    AttackInfeasible, ClientSpec, TraceEvent, context_overhead, find_collisions, gen_agility_probe,
    gen_client_trace, gen_eviction_attack, gen_saturation_attack, sort_trace,
)

__all__ = [
    "AttackInfeasible", "ClientSpec", "TraceEvent", "TraceFormatError", "context_overhead",
    "encode_context_packet", "find_collisions", "gen_agility_probe", "gen_client_trace",
    "gen_eviction_attack", "gen_saturation_attack", "pack_context", "read_trace", "sort_trace",
    "unpack_context", "write_trace",
]
