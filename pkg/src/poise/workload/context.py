"""Byte-level context header stack."""
from __future__ import annotations

from ..compiler.ir import ContextLayout
from ..dataplane.packet import CONTEXT, FlowKey, Packet


def pack_context(fields, layout: ContextLayout) -> bytes:
    """Big-endian bit packing of ``fields`` at the layout's offsets, padded to whole bytes."""
    acc = 0
    for f in layout.fields:
        if f.name not in fields:
            raise ValueError(f"missing context field {f.name!r}")
        v = fields[f.name]
        lo = -(1 << (f.width - 1)) if f.signed else 0
        hi = (1 << (f.width - 1)) - 1 if f.signed else (1 << f.width) - 1
        if not lo <= v <= hi:
            raise ValueError(f"value {v} does not fit {f.width}-bit field {f.name!r}")
        acc = (acc << f.width) | (v & ((1 << f.width) - 1))
    pad = layout.total_bytes * 8 - layout.total_bits
    return (acc << pad).to_bytes(layout.total_bytes, "big")


def unpack_context(data: bytes, layout: ContextLayout):
    if len(data) != layout.total_bytes:
        raise ValueError(f"context stack is {layout.total_bytes} bytes, got {len(data)}")
    acc = int.from_bytes(data, "big") >> (layout.total_bytes * 8 - layout.total_bits)
    out = {}
    for f in reversed(layout.fields):
        v = acc & ((1 << f.width) - 1)
        acc >>= f.width
        if f.signed and v >> (f.width - 1):
            v -= 1 << f.width
        out[f.name] = v
    return {f.name: out[f.name] for f in layout.fields}


def encode_context_packet(fields, layout: ContextLayout, key: FlowKey = FlowKey(0, 0, 6),
                          ts: float = 0.0, dip: int = 0, dport: int = 0, size: int = 0,
                          flow: int = -1, tag: str = "") -> Packet:
    """Context packet whose payload is the packed header stack.

    ``size`` defaults to the stack length; callers model wire size explicitly.
    """
    payload = pack_context(fields, layout)
    ctx = {f.name: fields[f.name] for f in layout.fields}
    return Packet(CONTEXT, key, ts, size or len(payload), dip, dport, ctx, payload, flow, tag)
