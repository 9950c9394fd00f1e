"""Per-packet logic of the Poise primitive and of the reactive baseline switch."""
from __future__ import annotations

import math
from collections import defaultdict

from ..controlplane.baseline import BaselineConfig, BaselineController
from ..controlplane.local import LatencyModel, LocalControlPlane
from ..controlplane.logger import logger_sink
from ..lang.syntax import Drop, Log
from .bloom import BloomFilter
from .config import PipelineConfig
from .crc import crc16
from .evaluator import Decision, Evaluator, MonitorRegisters

DENY = Decision(Drop(), "early-deny")
EXPIRED = Decision(Drop(), "deadline")
REFUSED = Decision(Drop(), "refused")


class SwitchState:
    """FullConn + decision registers, CRC-indexed Cache, blacklist filter, per-IP counts."""

    def __init__(self, program, config: PipelineConfig = PipelineConfig()):
        self.config = config
        self.capacity = config.fullconn_capacity
        self.fullconn = {}
        self.R = [None] * self.capacity
        self.idx_key = {}
        self.last_active = {}
        self.cache = [None] * config.cache_slots
        self.bf = BloomFilter(config.bf_bits, config.bf_hashes)
        self.bf_clear_until = -1.0
        self.regs = MonitorRegisters(program.monitors)
        self.per_ip = defaultdict(int)
        self._free = []
        self._next = 0
        self.on_install = None

    # -- index pool ----------------------------------------------------------

    def alloc_index(self):
        if self._free:
            return self._free.pop()
        if self._next < self.capacity:
            self._next += 1
            return self._next - 1
        return None

    def live_indices(self):
        return self._next - len(self._free)

    def install(self, key, idx, decision, now):
        self.fullconn[key] = idx
        self.R[idx] = decision
        self.idx_key[idx] = key
        self.last_active[idx] = now
        if self.on_install is not None:
            self.on_install(key, now)

    def remove(self, idx):
        key = self.idx_key.pop(idx)
        del self.fullconn[key]
        del self.last_active[idx]
        self.R[idx] = None
        self._free.append(idx)
        self.release_ip(key.sip)

    # -- admission -----------------------------------------------------------

    def admit(self, sip):
        if self.per_ip[sip] >= self.config.per_ip_cap:
            return False
        self.per_ip[sip] += 1
        return True

    def release_ip(self, sip):
        self.per_ip[sip] -= 1
        if self.per_ip[sip] <= 0:
            del self.per_ip[sip]

    # -- cache ---------------------------------------------------------------

    def slot(self, key):
        return crc16(key.to_bytes()) % self.config.cache_slots

    def cache_get(self, key):
        e = self.cache[self.slot(key)]
        if e is not None and e[0] == key:
            return e[1]
        return None

    def occupancy(self):
        return len(self.fullconn), sum(1 for e in self.cache if e is not None)


class PoiseSwitch:
    def __init__(self, sim, program, config: PipelineConfig, insert_latency: LatencyModel,
                 cache_rng, cp_rng, log_sink=None):
        self.sim = sim
        self.config = config
        self.state = SwitchState(program, config)
        self.ev = Evaluator(program)
        self.cp = LocalControlPlane(self.state, insert_latency, cp_rng)
        self.rng = cache_rng
        self.log_sink = log_sink
        self.ctx_delay = config.context_delay(program.rounds)
        self.max_passes = config.max_passes(insert_latency.mean())
        self.stats = defaultdict(int)
        self.parked = {}
        self.wait_key = {}
        self.wait_sip = {}
        self.bf_members = set()
        self.state.on_install = lambda key, now: self.notify_key(key, now)

    # -- cache insertion with opportunistic cross-source replacement ----------

    def _bf_add(self, sip, now):
        self.state.bf.add(sip)
        self.bf_members.add(sip)
        self.stats["bf_adds"] += 1
        self.notify_sip(sip, now)

    def _evict(self, entry, now):
        self.stats["cache_evictions"] += 1
        if isinstance(entry[1].action, Drop):
            self._bf_add(entry[0].sip, now)

    def _write(self, slot, key, decision, now):
        self.state.cache[slot] = (key, decision)
        self.notify_key(key, now)

    def cache_insert(self, key, decision, now=0.0):
        st = self.state
        slot = st.slot(key)
        e = st.cache[slot]
        if e is None or e[0] == key:
            self._write(slot, key, decision, now)
            return "write"
        if e[0].sip == key.sip:
            self._evict(e, now)
            self._write(slot, key, decision, now)
            return "same-source"
        if self.rng.random() < self.config.replace_prob:
            self._evict(e, now)
            self._write(slot, key, decision, now)
            return "replaced"
        self.stats["cache_deferred"] += 1
        if isinstance(decision.action, Drop):
            # the deny is not cached, so make sure the early-deny path covers it
            self._bf_add(key.sip, now)
        return "deferred"

    # -- blacklist -----------------------------------------------------------

    def blacklist(self, op, sip=None, now=0.0):
        st = self.state
        if op == "add":
            self._bf_add(sip, now)
            return True
        if op == "query":
            return st.bf.query(sip)
        if op == "clear":
            st.bf.clear()
            self.bf_members.clear()
            st.bf_clear_until = now + self.config.bf_clear_duration_ns
            self.stats["bf_clears"] += 1
            self.sim.schedule(st.bf_clear_until, self._clear_done)
            return True
        raise ValueError(op)

    # -- packets -------------------------------------------------------------

    def on_packet(self, pkt, now):
        if pkt.is_context:
            self.sim.schedule(now + self.ctx_delay, self.handle_context_packet, pkt, now)
        else:
            self.handle_data_packet(pkt, now)

    def handle_context_packet(self, pkt, ingress, now):
        st = self.state
        dec = self.ev.process(pkt.fields(), st.regs, ingress)
        key = pkt.key
        self.sim.decision(pkt, ingress, now, dec)
        self.sim.consume(pkt, now, dec.branch)
        idx = st.fullconn.get(key)
        if idx is not None:
            st.R[idx] = dec
            st.last_active[idx] = now
            slot = st.slot(key)
            e = st.cache[slot]
            if e is not None and e[0] == key:
                self._write(slot, key, dec, now)
            self.stats["refresh"] += 1
            return
        if key in self.cp.pending:
            self.cache_insert(key, dec, now)
            self.cp.request_insert(key, dec, now)
            return
        if not st.admit(key.sip):
            self.stats["admission_refused"] += 1
            self.cache_insert(key, REFUSED, now)
            return
        self.cache_insert(key, dec, now)
        p = self.cp.request_insert(key, dec, now)
        if p is None:
            st.release_ip(key.sip)
            self.stats["pool_refused"] += 1
        elif self.cp.instantaneous:
            self.cp.commit_ready(now)
        else:
            self.sim.schedule(p.ready_at, self._commit)

    def _clear_done(self, now):
        self._notify([p for p, _ in self.parked.values()], now)

    def _commit(self, now):
        self.cp.commit_ready(now)

    def _lookup(self, pkt, now):
        st = self.state
        key = pkt.key
        idx = st.fullconn.get(key)
        if idx is not None:
            st.last_active[idx] = now
            return st.R[idx], "fullconn"
        dec = st.cache_get(key)
        if dec is not None:
            return dec, "cache"
        if now >= st.bf_clear_until and st.bf.query(key.sip):
            return DENY, "early-deny"
        return None, None

    def handle_data_packet(self, pkt, now):
        dec, reason = self._lookup(pkt, now)
        if dec is not None:
            return self._finish(pkt, now, dec, reason)
        if self.max_passes <= 0:
            return self._finish(pkt, now, EXPIRED, "deadline")
        self._park(pkt, now)

    # Recirculating packets re-check state once per pass. State only changes
    # at discrete events, so a parked packet is woken at the first pass
    # boundary after a relevant change (or at its deadline) instead of on
    # every pass; the verdicts and pass counts are the same.

    def _park(self, pkt, now):
        self.parked[id(pkt)] = (pkt, now)
        self.wait_key.setdefault(pkt.key, []).append(pkt)
        self.wait_sip.setdefault(pkt.key.sip, []).append(pkt)
        self.sim.schedule(now + self.max_passes * self.config.recirc_latency_ns,
                          self._wake, pkt, self.max_passes)

    def _unpark(self, pkt):
        del self.parked[id(pkt)]
        for table, k in ((self.wait_key, pkt.key), (self.wait_sip, pkt.key.sip)):
            lst = table[k]
            lst[:] = [p for p in lst if p is not pkt]
            if not lst:
                del table[k]

    def _notify(self, pkts, now):
        R = self.config.recirc_latency_ns
        for pkt in list(pkts):
            _, t0 = self.parked[id(pkt)]
            k = max(pkt.recirc + 1, math.ceil((now - t0) / R))
            if k < self.max_passes:
                self.sim.schedule(t0 + k * R, self._wake, pkt, k)

    def notify_key(self, key, now):
        if key in self.wait_key:
            self._notify(self.wait_key[key], now)

    def notify_sip(self, sip, now):
        if sip in self.wait_sip:
            self._notify(self.wait_sip[sip], now)

    def _wake(self, pkt, k, now):
        if id(pkt) not in self.parked or self.parked[id(pkt)][0] is not pkt or k <= pkt.recirc:
            return
        pkt.recirc = k
        dec, reason = self._lookup(pkt, now)
        if dec is None and k >= self.max_passes:
            dec, reason = EXPIRED, "deadline"
        if dec is not None:
            self._unpark(pkt)
            self._finish(pkt, now, dec, reason)

    def _finish(self, pkt, now, dec, reason):
        if reason == "early-deny" and pkt.key.sip not in self.bf_members:
            self.stats["bf_false_positives"] += 1
        t_out = now + self.config.base_latency_ns + self.config.data_latency_ns
        if isinstance(dec.action, Log) and self.log_sink is not None:
            logger_sink(self.log_sink, pkt, t_out, dec.branch)
        self.sim.verdict(pkt, t_out, dec, reason)

    # -- periodic ------------------------------------------------------------

    def expire_flows(self, now):
        st = self.state
        idle = self.config.idle_timeout_ns
        stale = [idx for idx, t in st.last_active.items() if now - t > idle]
        for idx in stale:
            st.remove(idx)
        self.stats["expired"] += len(stale)
        return len(stale)

    def periodic(self):
        c = self.config
        return [(c.bf_clear_interval_ns, lambda now: self.blacklist("clear", now=now)),
                (c.scan_interval_ns, self.expire_flows)]

    def counters(self):
        out = dict(self.stats)
        out.update(cp_requested=self.cp.requested, cp_coalesced=self.cp.coalesced,
                   cp_refused=self.cp.refused, cp_committed=self.cp.committed)
        return out


class BaselineSwitch:
    """Reactive switch: every context goes to the controller; unknown flows wait for a FlowMod."""

    def __init__(self, sim, program, config: PipelineConfig, baseline: BaselineConfig, rng, log_sink=None):
        self.sim = sim
        self.config = config
        self.bcfg = baseline
        self.ctrl = BaselineController(baseline, rng)
        self.ev = Evaluator(program)
        self.regs = MonitorRegisters(program.monitors)
        self.rules = {}
        self.applied = {}
        self.buffered = defaultdict(list)
        self.log_sink = log_sink
        self.seq = 0
        self.stats = defaultdict(int)

    def on_packet(self, pkt, now):
        if pkt.is_context:
            self.sim.consume(pkt, now, "controller")
            dec = self.ev.process(pkt.fields(), self.regs, now)
            t = self.ctrl.packet_in(now)
            if t is None:
                self.stats["queue_drops"] += 1
                return
            self.seq += 1
            self.sim.schedule(t, self.install, pkt, now, dec, self.seq)
            return
        dec = self.rules.get(pkt.key)
        if dec is not None:
            return self._finish(pkt, now, dec, "rule")
        self.buffered[pkt.key].append(pkt)
        self.sim.schedule(pkt.ts + self.bcfg.connection_timeout_ns, self.timeout, pkt)

    def install(self, pkt, ingress, dec, seq, now):
        key = pkt.key
        if self.applied.get(key, 0) > seq:
            return
        self.applied[key] = seq
        self.rules[key] = dec
        self.sim.decision(pkt, ingress, now, dec)
        for p in self.buffered.pop(key, []):
            self._finish(p, now, dec, "buffered")

    def timeout(self, pkt, now):
        waiting = self.buffered.get(pkt.key)
        if waiting and any(p is pkt for p in waiting):
            waiting[:] = [p for p in waiting if p is not pkt]
            if not waiting:
                del self.buffered[pkt.key]
            self._finish(pkt, now, EXPIRED, "timeout")

    def _finish(self, pkt, now, dec, reason):
        t_out = now + self.config.base_latency_ns
        if isinstance(dec.action, Log) and self.log_sink is not None:
            logger_sink(self.log_sink, pkt, t_out, dec.branch)
        self.sim.verdict(pkt, t_out, dec, reason)

    def periodic(self):
        return []

    def counters(self):
        out = dict(self.stats)
        out.update(ctrl_arrivals=self.ctrl.arrivals, ctrl_enqueued=self.ctrl.enqueued,
                   ctrl_dropped=self.ctrl.dropped, ctrl_max_queue=self.ctrl.max_queue)
        return out
