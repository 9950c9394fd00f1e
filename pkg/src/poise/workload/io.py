"""JSON Lines trace files: a header line, then one event per line."""
from __future__ import annotations

import json

from ..dataplane.packet import CONTEXT, DATA, FlowKey, Packet
from .traces import TraceEvent

TRACE_FORMAT = "poise-trace"
TRACE_VERSION = 1


class TraceFormatError(ValueError):
    pass


def event_to_json(e: TraceEvent):
    p = e.packet
    d = {"ts": e.ts, "kind": p.kind, "sip": p.key.sip, "sport": p.key.sport, "proto": p.key.proto,
         "size": p.size, "dip": p.dip, "dport": p.dport, "flow": p.flow, "tag": p.tag}
    if p.kind == CONTEXT:
        d["ctx"] = p.ctx or {}
        d["payload"] = p.payload.hex()
    return d


def event_from_json(d):
    try:
        kind = d["kind"]
        if kind not in (CONTEXT, DATA):
            raise TraceFormatError(f"unknown packet kind {kind!r}")
        key = FlowKey(int(d["sip"]), int(d["sport"]), int(d["proto"]))
        ts = float(d["ts"])
        ctx = {k: int(v) for k, v in d["ctx"].items()} if kind == CONTEXT else None
        payload = bytes.fromhex(d.get("payload", "")) if kind == CONTEXT else b""
        pkt = Packet(kind, key, ts, int(d["size"]), int(d["dip"]), int(d["dport"]), ctx, payload,
                     int(d.get("flow", -1)), d.get("tag", ""))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, TraceFormatError):
            raise
        raise TraceFormatError(f"bad trace event: {exc}") from exc
    return TraceEvent(ts, pkt)


def write_trace(events, path, meta=None):
    with open(path, "w") as fh:
        fh.write(json.dumps({"format": TRACE_FORMAT, "version": TRACE_VERSION, "meta": meta or {}},
                            sort_keys=True) + "\n")
        for e in events:
            fh.write(json.dumps(event_to_json(e), sort_keys=True) + "\n")


def read_trace(path):
    """Events and header metadata; raises TraceFormatError on schema problems."""
    with open(path) as fh:
        first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise TraceFormatError("missing trace header") from exc
        if header.get("format") != TRACE_FORMAT:
            raise TraceFormatError("not a poise trace file")
        if header.get("version") != TRACE_VERSION:
            raise TraceFormatError(f"unsupported trace version {header.get('version')}")
        events = []
        last = float("-inf")
        for n, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                e = event_from_json(json.loads(line))
            except json.JSONDecodeError as exc:
                raise TraceFormatError(f"line {n}: {exc}") from exc
            if e.ts < last:
                raise TraceFormatError(f"line {n}: timestamps must be nondecreasing")
            last = e.ts
            events.append(e)
    return events, header.get("meta", {})
