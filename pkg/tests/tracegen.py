"""Random flow traces and reference models for dataplane differential tests."""
import math
import random

import numpy as np

from poise.compiler import CompileError, compile_policy
from poise.dataplane.config import PipelineConfig
from poise.dataplane.packet import CONTEXT, DATA, FlowKey, Packet
from poise.dataplane.sim import Simulator, verdict_name
from poise.dataplane.switch import EXPIRED, PoiseSwitch
from poise.lang import PolicyError, parse, validate
from poise.lang.interp import Interpreter, MonitorOracle, evaluate_context
from poise.lang.syntax import Drop

from policygen import FIELDS, random_policy


def random_trace(rng: random.Random, n_flows=8, n_packets=120, n_sips=3, grid_ns=1000,
                 slots=10_000_000, p_context=0.3):
    """Packets on a coarse time grid with distinct timestamps, fields from the policygen domain."""
    sips = [0x0A000000 + rng.randrange(1, 1 << 16) for _ in range(n_sips)]
    keys = set()
    while len(keys) < n_flows:
        keys.add(FlowKey(rng.choice(sips), rng.randrange(1024, 65536), 6))
    keys = sorted(keys)
    times = sorted(rng.sample(range(1, slots), n_packets))
    out = []
    for t in times:
        i = rng.randrange(len(keys))
        key = keys[i]
        ts = float(t * grid_ns)
        if rng.random() < p_context:
            ctx = {f: rng.randint(lo, hi) for f, (lo, hi) in FIELDS.items()}
            out.append(Packet(CONTEXT, key, ts, 80, 0, 0, ctx, b"", i))
        else:
            out.append(Packet(DATA, key, ts, 512, 0, 0, None, b"", i))
    return out


def random_setup(seed, **trace_kw):
    """A compilable random policy and a random trace, both drawn from ``seed``."""
    rng = random.Random(seed)
    while True:
        try:
            vp = validate(parse(random_policy(rng)))
            prog = compile_policy(vp, check_conflicts=False)
            break
        except (PolicyError, CompileError):
            continue
    return rng, vp, prog, random_trace(rng, **trace_kw)


def tagging_oracle(vp, trace):
    """Governing decision per data packet: the latest earlier context of its flow, evaluated on the AST."""
    interp = Interpreter(vp)
    oracle = MonitorOracle(vp.ast.monitors)
    latest, out = {}, {}
    for p in trace:
        if p.kind == CONTEXT:
            latest[p.key] = evaluate_context(vp, p.fields(), p.ts, oracle, interp)
        else:
            out[p.ts] = latest.get(p.key)
    return out


def naive_flow_map(program, trace):
    """Per-flow map updated by each context; data packets read it, unknown flows drop."""
    from poise.dataplane.evaluator import Evaluator, MonitorRegisters

    ev = Evaluator(program)
    regs = MonitorRegisters(program.monitors)
    state, out = {}, {}
    for p in trace:
        if p.kind == CONTEXT:
            state[p.key] = ev.process(p.fields(), regs, p.ts).action
        else:
            out[p.ts] = state.get(p.key, Drop())
    return out


def data_verdicts(result):
    return {r.ts_in: (r.verdict, r.port) for r in result.records if r.kind == DATA}


def as_verdict(action):
    return verdict_name(action), getattr(action, "port", None)


class PerPassSwitch(PoiseSwitch):
    """Reference recirculation: a parked packet re-checks state on every pass."""

    def _notify(self, pkts, now):
        pass

    def _park(self, pkt, now):
        self.parked[id(pkt)] = (pkt, now)
        self.sim.schedule(now + self.config.recirc_latency_ns, self._pass, pkt, 1)

    def _pass(self, pkt, k, now):
        pkt.recirc = k
        dec, reason = self._lookup(pkt, now)
        if dec is None and k >= self.max_passes:
            dec, reason = EXPIRED, "deadline"
        if dec is None:
            self.sim.schedule(now + self.config.recirc_latency_ns, self._pass, pkt, k + 1)
            return
        del self.parked[id(pkt)]
        self._finish(pkt, now, dec, reason)


def per_pass_simulator(program, seed=0, config=PipelineConfig(), **kw):
    sim = Simulator(program, "poise", config, seed=seed, **kw)
    cache_ss, cp_ss = np.random.SeedSequence(seed).spawn(2)
    sim.switch = PerPassSwitch(sim, program, config, sim.switch.cp.latency,
                               np.random.default_rng(cache_ss), np.random.default_rng(cp_ss))
    return sim


def deadline_passes(config, latency):
    return max(1, math.ceil(config.deadline_factor * latency.mean() / config.recirc_latency_ns))


def governing_at_verdict(vp, trace, result, config=PipelineConfig(), ctx_delay=None):
    """For each data record, the AST decision of the latest context committed before its verdict.

    A recirculating packet is decided when it leaves the pipeline, so that is
    the moment whose context governs it.
    """
    ctx_delay = config.context_latency_ns if ctx_delay is None else ctx_delay
    interp = Interpreter(vp)
    oracle = MonitorOracle(vp.ast.monitors)
    history = {}
    for p in trace:
        if p.kind == CONTEXT:
            dec = evaluate_context(vp, p.fields(), p.ts, oracle, interp)
            history.setdefault(p.key, []).append((p.ts + ctx_delay, dec))
    out = {}
    extra = config.base_latency_ns + config.data_latency_ns
    for r in result.records:
        if r.kind != DATA:
            continue
        decided = r.ts_out - extra
        dec = None
        for t, d in history.get(FlowKey(r.sip, r.sport, r.proto), []):
            if t <= decided:
                dec = d
        out[r.ts_in] = (dec, r)
    return out
