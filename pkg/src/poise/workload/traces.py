"""Seeded trace generators for clients, attacks and agility probes."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np

from ..compiler.ir import ContextLayout
from ..dataplane.config import SECOND
from ..dataplane.crc import CCITT_FALSE, crc16
from ..dataplane.packet import CONTEXT, DATA, FlowKey, Packet
from .context import pack_context

SERVER_IP = 0x0A000001
SERVER_PORT = 443
DORMANT_NS = 5 * SECOND
EPHEMERAL_BASE = 32768


class TraceEvent(NamedTuple):
    ts: float
    packet: Packet


@dataclass(frozen=True)
class ClientSpec:
    """One device. ``schedule`` is a sorted tuple of (t_ns, field values), piecewise constant."""
    sip: int
    schedule: Tuple[Tuple[float, Dict[str, int]], ...] = ((0.0, {}),)
    context_freq_hz: float = 0.1
    flow_rate_hz: float = 0.0
    duration_median_s: float = 5.0
    duration_sigma: float = 0.5
    data_rate_pps: float = 10.0
    context_size: int = 80
    data_size: int = 512
    dip: int = SERVER_IP
    dport: int = SERVER_PORT
    proto: int = 6
    tag: str = "legit"

    def __post_init__(self):
        if not self.context_freq_hz > 0:
            raise ValueError("context frequency must be positive")
        if not self.schedule or self.schedule[0][0] > 0:
            raise ValueError("schedule must start at time 0")
        if any(b[0] < a[0] for a, b in zip(self.schedule, self.schedule[1:])):
            raise ValueError("schedule times must be sorted")

    def values_at(self, t):
        cur = self.schedule[0][1]
        for start, vals in self.schedule:
            if start <= t:
                cur = vals
            else:
                break
        return dict(cur)


def _context(spec, key, t, flow, layout, values=None):
    values = spec.values_at(t) if values is None else values
    payload = pack_context(values, layout) if layout is not None else b""
    ctx = {f.name: values[f.name] for f in layout.fields} if layout is not None else dict(values)
    return Packet(CONTEXT, key, t, spec.context_size, spec.dip, spec.dport, ctx, payload, flow, spec.tag)


def _data(spec, key, t, flow):
    return Packet(DATA, key, t, spec.data_size, spec.dip, spec.dport, None, b"", flow, spec.tag)


def sort_trace(packets):
    order = sorted(range(len(packets)), key=lambda i: (packets[i].ts, i))
    return [TraceEvent(packets[i].ts, packets[i]) for i in order]


def gen_client_trace(spec: ClientSpec, horizon_ns: float, seed: int = 0,
                     layout: Optional[ContextLayout] = None, flow_base: int = 0,
                     start_ns: float = 0.0):
    """Flows of one client: leading context, constant-rate data, periodic and dormant-socket contexts.

    ``flow_rate_hz = 0`` gives a single flow spanning the horizon; an infinite
    context frequency sends a fresh context ahead of every data packet.
    """
    rng = np.random.default_rng(seed)
    flows = []
    if spec.flow_rate_hz <= 0:
        flows.append((float(start_ns), float(horizon_ns)))
    else:
        t = start_ns + rng.exponential(SECOND / spec.flow_rate_hz)
        while t < horizon_ns:
            dur = rng.lognormal(math.log(spec.duration_median_s * SECOND), spec.duration_sigma)
            flows.append((t, min(float(horizon_ns), t + dur)))
            t += rng.exponential(SECOND / spec.flow_rate_hz)
    per_packet = math.isinf(spec.context_freq_hz)
    period = None if per_packet else SECOND / spec.context_freq_hz
    gap = SECOND / spec.data_rate_pps
    lead = 1_000.0
    out = []
    for n, (start, end) in enumerate(flows):
        key = FlowKey(spec.sip, EPHEMERAL_BASE + (flow_base + n) % (65536 - EPHEMERAL_BASE), spec.proto)
        flow = flow_base + n
        out.append(_context(spec, key, start, flow, layout))
        if period is not None:
            t = start + period
            while t < end:
                out.append(_context(spec, key, t, flow, layout))
                t += period
        t = start + lead
        last = start
        while t < end:
            if per_packet:
                out.append(_context(spec, key, t - lead / 2, flow, layout))
            elif t - last > DORMANT_NS:
                out.append(_context(spec, key, t - lead / 2, flow, layout))
            out.append(_data(spec, key, t, flow))
            last = t
            t += gap
    return sort_trace(out)


def attack_key(i, sips):
    """i-th fresh FlowKey: source port first, then protocol, per attacker address."""
    sip = sips[i % len(sips)]
    j = i // len(sips)
    sport = j % 65536
    proto = (j // 65536) % 256
    if j >= 65536 * 256:
        raise ValueError("attacker flow-key space exhausted")
    return FlowKey(sip, sport, proto)


ATTACKER_BASE = 0xC6120000  # 198.18.0.0/15, benchmarking space


def gen_saturation_attack(rate: float, duration_ns: float, seed: int = 0, sips=None,
                          values=None, layout: Optional[ContextLayout] = None, start_ns: float = 0.0,
                          context_size: int = 80, data_size: int = 64, dip: int = SERVER_IP,
                          dport: int = SERVER_PORT, flow_base: int = 1_000_000):
    """Fresh connections (context + data) at Poisson rate ``rate`` per second."""
    if not rate > 0:
        raise ValueError("attack rate must be positive")
    rng = np.random.default_rng(seed)
    sips = list(sips) if sips is not None else [ATTACKER_BASE + i for i in range(256)]
    values = dict(values or {})
    spec = ClientSpec(sips[0], ((0.0, values),), context_size=context_size, data_size=data_size,
                      dip=dip, dport=dport, tag="attack")
    n = int(rng.poisson(rate * duration_ns / SECOND))
    times = np.sort(rng.uniform(start_ns, start_ns + duration_ns, n))
    out = []
    for i, t in enumerate(times):
        key = attack_key(i, sips)
        t = float(t)
        out.append(_context(spec, key, t, flow_base + i, layout, values))
        out.append(_data(spec, key, t + 1_000.0, flow_base + i))
    return sort_trace(out)


def find_collisions(victim: FlowKey, attacker_sip: int, limit: int = 16, slots: int = 1 << 16):
    """Attacker FlowKeys whose cache slot equals the victim's, searching sport within each proto."""
    target = crc16(victim.to_bytes()) % slots
    sports = np.arange(65536, dtype=np.uint32)
    base = np.frombuffer(attacker_sip.to_bytes(4, "big"), dtype=np.uint8)
    found = []
    if limit <= 0:
        return found
    for proto in range(256):
        rows = np.empty((65536, 7), dtype=np.uint8)
        rows[:, :4] = base
        rows[:, 4] = sports >> 8
        rows[:, 5] = sports & 0xFF
        rows[:, 6] = proto
        hits = np.nonzero(CCITT_FALSE.many(rows).astype(np.int64) % slots == target)[0]
        for s in hits:
            found.append(FlowKey(attacker_sip, int(s), proto))
            if len(found) >= limit:
                return found
    return found


class AttackInfeasible(Exception):
    pass


def gen_eviction_attack(victim: FlowKey, attacker_sip: int, rate: float, duration_ns: float,
                        seed: int = 0, values=None, layout: Optional[ContextLayout] = None,
                        start_ns: float = 0.0, n_keys: int = 8, context_size: int = 80):
    """Context packets from colliding attacker flows, aimed at the victim's cache slot."""
    if n_keys < 1:
        raise ValueError("n_keys must be at least 1")
    if attacker_sip == victim.sip:
        keys = [k for k in find_collisions(victim, attacker_sip, n_keys + 1) if k != victim][:n_keys]
    else:
        keys = find_collisions(victim, attacker_sip, n_keys)
    if not keys:
        raise AttackInfeasible(f"no cache collision for source {attacker_sip:#x}")
    rng = np.random.default_rng(seed)
    values = dict(values or {})
    spec = ClientSpec(attacker_sip, ((0.0, values),), context_size=context_size, tag="attack")
    n = max(1, int(round(rate * duration_ns / SECOND)))
    times = start_ns + np.arange(n) * (SECOND / rate) + rng.uniform(0, 1.0, n)
    out = [_context(spec, keys[i % len(keys)], float(t), 2_000_000 + i % len(keys), layout, values)
           for i, t in enumerate(times)]
    return sort_trace(out), keys


def gen_agility_probe(key: FlowKey, allow: Dict[str, int], deny: Dict[str, int], t_change: float,
                      layout: Optional[ContextLayout] = None, n_data: int = 40,
                      first_gap_ns: float = 10.0, growth: float = 1.5, flow: int = 0,
                      flip: bool = True, dip: int = SERVER_IP, dport: int = SERVER_PORT,
                      warmup_ns: float = 20e6, tag: str = "probe"):
    """Allow context, steady traffic, then a context flipping to deny and a dense data train.

    Gaps after the flip grow geometrically so both nanosecond and second-scale
    reactions are resolved.
    """
    spec = ClientSpec(key.sip, ((0.0, allow),), dip=dip, dport=dport, proto=key.proto, tag=tag)
    out = [_context(spec, key, t_change - warmup_ns, flow, layout, allow)]
    t = t_change - warmup_ns / 2
    out.append(_data(spec, key, t, flow))
    out.append(_context(spec, key, t_change, flow, layout, deny if flip else allow))
    gap, t = first_gap_ns, t_change
    for _ in range(n_data):
        t += gap
        out.append(_data(spec, key, t, flow))
        gap *= growth
    return sort_trace(out)


def context_overhead(trace, horizon_ns, tag=None):
    """Context bytes per second over the horizon, optionally for one tag."""
    total = sum(e.packet.size for e in trace
                if e.packet.kind == CONTEXT and (tag is None or e.packet.tag == tag))
    return total / (horizon_ns / SECOND)

