import math
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poise import corpus
from poise.compiler import compile_policy
from poise.controlplane import ZERO_LATENCY, LatencyModel
from poise.dataplane import (
    CONTEXT, DATA, BloomFilter, Evaluator, FlowKey, MonitorRegisters, Packet, PipelineConfig,
    Simulator, analytic_fp_rate, crc16, eval_policy, simulate,
)
from poise.dataplane.crc import CATALOG, crc16_bitwise
from poise.dataplane.evaluator import Decision
from poise.lang import parse, validate
from poise.lang.interp import MonitorOracle, evaluate_context
from poise.lang.syntax import Drop, Fwd
from poise.workload.traces import find_collisions

from tracegen import (
    as_verdict, data_verdicts, governing_at_verdict, naive_flow_map, per_pass_simulator, random_setup,
    tagging_oracle,
)

GATE = compile_policy("if match(x == 1) then fwd(server) else drop")
ALLOW, DENY = {"x": 1}, {"x": 0}
KEY = FlowKey(0x0A000002, 40000, 6)


def ctx(key, ts, values, flow=0):
    return Packet(CONTEXT, key, float(ts), 80, 0, 0, dict(values), b"", flow)


def data(key, ts, flow=0):
    return Packet(DATA, key, float(ts), 512, 0, 0, None, b"", flow)


def switch(program=GATE, **cfg):
    latency = cfg.pop("latency", LatencyModel())
    return Simulator(program, config=PipelineConfig(**cfg), insert_latency=latency).switch


# -- CRC-16 ------------------------------------------------------------------------

# published check values over the ASCII string "123456789"
CHECK = {
    "CRC-16/CCITT-FALSE": 0x29B1, "CRC-16/BUYPASS": 0xFEE8, "CRC-16/T10-DIF": 0xD0DB,
    "CRC-16/DNP": 0xEA82, "CRC-16/CDMA2000": 0x4C06, "CRC-16/DECT-R": 0x007E, "CRC-16/ARC": 0xBB3D,
}


@pytest.mark.parametrize("crc", CATALOG, ids=lambda c: c.name)
def test_crc_check_values(crc):
    assert crc(b"123456789") == CHECK[crc.name]


@settings(max_examples=200)
@given(st.binary(max_size=32))
def test_crc_matches_bitwise_reference(data_):
    for c in CATALOG:
        assert c(data_) == crc16_bitwise(data_, c.poly, c.init, c.refin, c.refout, c.xorout)
    assert crc16(data_) == crc16_bitwise(data_)


@settings(max_examples=50)
@given(st.lists(st.binary(min_size=7, max_size=7), min_size=1, max_size=20))
def test_crc_vectorized(rows):
    arr = np.frombuffer(b"".join(rows), dtype=np.uint8).reshape(len(rows), 7)
    for c in CATALOG:
        assert list(c.many(arr)) == [c(r) for r in rows]


@given(st.integers(0, 2**32 - 1), st.integers(0, 65535), st.integers(0, 255))
def test_flow_key_is_seven_bytes(sip, sport, proto):
    k = FlowKey(sip, sport, proto)
    assert len(k.to_bytes()) == 7 and FlowKey.from_bytes(k.to_bytes()) == k


# -- Bloom filter --------------------------------------------------------------------

def test_bloom_basics():
    bf = BloomFilter()
    assert not bf.query(1234)
    bf.add(1234)
    assert bf.query(1234) and 1234 in bf
    bf.clear()
    assert not bf.query(1234)


@settings(max_examples=100)
@given(st.lists(st.integers(0, 2**32 - 1), max_size=200), st.integers(1, 5))
def test_bloom_no_false_negatives(sips, h):
    bf = BloomFilter(1 << 12, h)
    for s in sips[: len(sips) // 2]:
        bf.add(s)
    bf.add_many(np.array(sips[len(sips) // 2:], dtype=np.uint32))
    assert all(bf.query(s) for s in sips)
    if sips:
        assert bf.query_many(np.array(sips, dtype=np.uint32)).all()


def test_bloom_analytic_value():
    # (1 - e^{-3000/65536})^3 evaluated by hand: 0.04474^3
    assert analytic_fp_rate(1000, 1 << 16, 3) == pytest.approx(8.96e-5, rel=5e-3)


def test_bloom_fp_rate():
    rng = np.random.default_rng(3)
    members = rng.choice(1 << 31, 1000, replace=False).astype(np.uint32)
    bf = BloomFilter()
    bf.add_many(members)
    probes = ((1 << 31) + rng.choice(1 << 31, 1_000_000, replace=False)).astype(np.uint32)
    rate = bf.query_many(probes).mean()
    expect = analytic_fp_rate(1000, 1 << 16, 3)
    assert expect / 2 <= rate <= 2 * expect


def test_bloom_vector_positions_match_scalar():
    bf = BloomFilter()
    sips = [0, 1, 0xDEADBEEF, 2**32 - 1]
    assert bf.positions_many(sips).tolist() == [bf._positions(s) for s in sips]


# -- evaluation -------------------------------------------------------------------------

def test_p3_radius():
    prog = compile_policy(corpus.load("p3"))
    assert eval_policy(prog, {"lat": 300, "lon": -400}) == Fwd("server")
    assert eval_policy(prog, {"lat": 1000, "lon": 0}) == Drop()
    assert eval_policy(prog, {"lat": -999, "lon": 0}) == Fwd("server")


def test_p4_monitor_against_interpreter():
    vp = validate(corpus.load("p4"))
    prog = compile_policy(vp)
    regs, oracle, ev = MonitorRegisters(prog.monitors), MonitorOracle(vp.ast.monitors), Evaluator(prog)
    bob = vp.strings["Bob"]
    s = 1_000_000_000
    for t, usr in [(0, 5), (1 * s, bob), (2 * s, 5), (13 * s, 5)]:
        got = ev.process({"usr": usr}, regs, t).action
        assert got == evaluate_context(vp, {"usr": usr}, t, oracle)
    assert ev.process({"usr": 5}, MonitorRegisters(prog.monitors), 0).action == Drop()


def test_monitor_timeout_reset():
    regs = MonitorRegisters(compile_policy(corpus.load("p4")).monitors)
    s = 1_000_000_000
    regs.update("c", 0)
    assert regs.read("c", 1 * s) == 1
    assert regs.read("c", 11 * s) == 0
    regs.update("c", 20 * s)
    regs.update("c", 21 * s)
    regs.update("c", 40 * s)
    assert regs.read("c", 40 * s) == 1


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(0, 3000), st.booleans()), max_size=40))
def test_monitor_registers_match_event_replay(steps):
    window = 1000
    vp = validate(parse("m = count(match(x > 0), 1us)\nif match(m > 0) then drop"))
    prog = compile_policy(vp)
    assert prog.monitors[0].timeout_ns == window
    regs, oracle = MonitorRegisters(prog.monitors), MonitorOracle(vp.ast.monitors)
    t = 0
    for dt, hit in steps:
        t += dt
        if hit:
            regs.update("m", t)
            oracle.record("m", t)
        assert regs.read("m", t) == oracle.value("m", t)


# -- context path -------------------------------------------------------------------------

def test_refresh_existing_flow_stays_in_data_plane():
    trace = [ctx(KEY, 0, ALLOW), data(KEY, 1e6), ctx(KEY, 2e6, DENY), data(KEY, 3e6)]
    res = simulate(GATE, trace, insert_latency=ZERO_LATENCY)
    assert res.counters["cp_requested"] == 1 and res.counters["refresh"] == 1
    assert [r.verdict for r in res.data()] == ["fwd", "drop"]
    assert [r.reason for r in res.data()] == ["fullconn", "fullconn"]


def test_new_flow_cache_and_pending_insert():
    sim = Simulator(GATE)
    sim.run([ctx(KEY, 0, ALLOW)], horizon=1_000)
    sw = sim.switch
    assert sw.state.cache_get(KEY).action == Fwd("server")
    assert sw.cp.outstanding() == 1 and KEY not in sw.state.fullconn


def test_per_ip_cap():
    trace = [ctx(FlowKey(KEY.sip, 1000 + i, 6), i * 10, ALLOW, i) for i in range(1001)]
    trace.append(data(FlowKey(KEY.sip, 2000, 6), 20_000, 1000))
    res = simulate(GATE, trace, insert_latency=ZERO_LATENCY)
    assert res.counters["admission_refused"] == 1
    (last,) = res.data()
    assert last.verdict == "drop"


# -- data path -------------------------------------------------------------------------------

def test_data_path_latencies_and_order():
    cfg = PipelineConfig()
    lat = LatencyModel("constant", 100_000.0)
    other = FlowKey(0x0A000009, 1, 6)
    trace = [ctx(KEY, 0, ALLOW), data(KEY, 10_000), data(KEY, 200_000), data(other, 300_000, 1)]
    res = simulate(GATE, trace, insert_latency=lat)
    cache_hit, full_hit, nothing = res.data()
    assert (cache_hit.reason, cache_hit.passes) == ("cache", 0)
    assert (full_hit.reason, full_hit.passes) == ("fullconn", 0)
    assert full_hit.ts_out - full_hit.ts_in == cfg.base_latency_ns + cfg.data_latency_ns == 488
    k = math.ceil(2 * 100_000 / 750)
    assert (nothing.verdict, nothing.reason, nothing.passes) == ("drop", "deadline", k)
    assert nothing.ts_out - nothing.ts_in == pytest.approx(k * 750 + 488)
    (d,) = res.decisions
    assert d.ts_commit - d.ts_in == pytest.approx(100.4)


def test_recirculating_packet_picks_up_install():
    # the data packet arrives before its context has been evaluated
    trace = [data(KEY, 0), ctx(KEY, 10, ALLOW)]
    res = simulate(GATE, trace, insert_latency=LatencyModel("constant", 50_000.0))
    (r,) = res.data()
    assert r.verdict == "fwd" and r.passes == 1 and r.reason == "cache"


def test_early_deny():
    sw = switch(latency=LatencyModel("constant", 1e6))
    sw.blacklist("add", KEY.sip)
    assert sw.blacklist("query", KEY.sip)
    assert sw._lookup(data(KEY, 10), 10)[1] == "early-deny"


def test_bf_clear_window_recirculates():
    sw = switch()
    sw.blacklist("clear", now=0.0)
    sw.blacklist("add", KEY.sip, now=0.0)
    assert sw._lookup(data(KEY, 500), 500) == (None, None)
    assert sw._lookup(data(KEY, 1500), 1500)[1] == "early-deny"


# -- cache insertion -----------------------------------------------------------------------------

def test_same_source_collision_replaces():
    sw = switch()
    (mate,) = [k for k in find_collisions(KEY, KEY.sip, 2) if k != KEY][:1]
    assert sw.state.slot(mate) == sw.state.slot(KEY)
    assert sw.cache_insert(KEY, Decision(Drop(), "x")) == "write"
    assert sw.cache_insert(mate, Decision(Fwd("server"), "y")) == "same-source"
    assert sw.state.cache_get(KEY) is None
    assert sw.state.bf.query(KEY.sip)


@pytest.mark.parametrize("p, outcome", [(1.0, "replaced"), (0.0, "deferred")])
def test_cross_source_collision(p, outcome):
    sw = switch(replace_prob=p)
    (atk,) = find_collisions(KEY, 0xC6120001, 1)
    sw.cache_insert(KEY, Decision(Fwd("server"), "x"))
    assert sw.cache_insert(atk, Decision(Drop(), "y")) == outcome
    assert (sw.state.cache_get(KEY) is None) == (p == 1.0)
    # a deny that could not be cached falls back to the blacklist
    assert sw.state.bf.query(atk.sip) == (p == 0.0)


def test_cross_source_replacement_rate():
    sw = switch()
    atk = find_collisions(KEY, 0xC6120001, 1)[0]
    n, hits = 4000, 0
    for _ in range(n):
        sw.state.cache[sw.state.slot(KEY)] = (KEY, Decision(Fwd("server"), "x"))
        hits += sw.cache_insert(atk, Decision(Fwd("server"), "y")) == "replaced"
    # binomial(4000, 0.5): 4 standard deviations is about 126
    assert abs(hits - n / 2) < 130


def test_replacement_is_seeded():
    outcomes = []
    for _ in range(2):
        sw = switch()
        atk = find_collisions(KEY, 0xC6120001, 1)[0]
        seq = []
        for _ in range(50):
            sw.state.cache[sw.state.slot(KEY)] = (KEY, Decision(Fwd("server"), "x"))
            seq.append(sw.cache_insert(atk, Decision(Fwd("server"), "y")))
        outcomes.append(seq)
    assert outcomes[0] == outcomes[1]


def test_cache_compares_full_tuple():
    sw = switch()
    (atk,) = find_collisions(KEY, 0xC6120001, 1)
    sw.cache_insert(atk, Decision(Fwd("server"), "y"))
    assert sw.state.cache_get(KEY) is None


# -- flow expiry ------------------------------------------------------------------------------------

def test_expire_flows():
    sw = switch(fullconn_capacity=2)
    st_ = sw.state
    idle = sw.config.idle_timeout_ns
    a, b, c = (FlowKey(1, i, 6) for i in range(3))
    for key in (a, b):
        st_.admit(key.sip)
        st_.install(key, st_.alloc_index(), Decision(Fwd("server"), ""), 0.0)
    assert st_.alloc_index() is None
    st_.last_active[st_.fullconn[b]] = 2 * idle - 10
    assert sw.expire_flows(2 * idle) == 1
    assert a not in st_.fullconn and b in st_.fullconn
    assert st_.per_ip[1] == 1
    assert st_.alloc_index() is not None


def test_data_packets_refresh_activity():
    cfg = PipelineConfig(idle_timeout_ns=5_000_000, scan_interval_ns=1_000_000)
    trace = [ctx(KEY, 0, ALLOW)] + [data(KEY, t * 1e6) for t in range(1, 20)]
    res = simulate(GATE, trace, config=cfg, insert_latency=ZERO_LATENCY)
    assert all(r.reason == "fullconn" for r in res.data())
    # the flow only goes idle once the trace ends
    assert res.counters["expired"] == 1


# -- whole-trace properties ----------------------------------------------------------------------------

STRESS = PipelineConfig(cache_slots=8, bf_bits=256, bf_clear_interval_ns=40_000,
                        bf_clear_duration_ns=2_000, replace_prob=0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_event_driven_matches_per_pass(seed):
    _, _, prog, trace = random_setup(seed, n_packets=150, slots=300)
    lat = LatencyModel("lognormal", 20_000.0, 0.5)
    fast = Simulator(prog, config=STRESS, insert_latency=lat, seed=seed % 97).run(trace)
    ref = per_pass_simulator(prog, seed=seed % 97, config=STRESS, insert_latency=lat).run(trace)
    assert sorted(fast.records) == sorted(ref.records)
    assert fast.counters == ref.counters


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_subflow_decisions(seed):
    _, vp, prog, trace = random_setup(seed)
    res = simulate(prog, trace, insert_latency=ZERO_LATENCY)
    got = data_verdicts(res)
    for ts, dec in tagging_oracle(vp, trace).items():
        assert got[ts] == as_verdict(dec if dec is not None else Drop())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_deny_safety_under_latency(seed):
    _, vp, prog, trace = random_setup(seed, slots=2000)
    lat = LatencyModel("lognormal", 200_000.0, 1.0)
    res = simulate(prog, trace, config=STRESS, insert_latency=lat, seed=seed % 13)
    for dec, rec in governing_at_verdict(vp, trace, res, STRESS).values():
        if dec is None or isinstance(dec, Drop):
            assert rec.verdict == "drop", rec


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_primitive_matches_naive_map(seed):
    _, _, prog, trace = random_setup(seed, n_flows=random.Random(seed).randint(1, 64), n_packets=300)
    res = simulate(prog, trace, insert_latency=ZERO_LATENCY)
    got = data_verdicts(res)
    assert got == {ts: as_verdict(a) for ts, a in naive_flow_map(prog, trace).items()}


def test_conservation_and_determinism():
    _, _, prog, trace = random_setup(11, n_packets=400, slots=5000)
    lat = LatencyModel("lognormal", 50_000.0, 0.5)
    a = simulate(prog, trace, config=STRESS, insert_latency=lat, seed=4)
    b = simulate(prog, trace, config=STRESS, insert_latency=lat, seed=4)
    assert a.records == b.records and a.counters == b.counters
    assert a.packets_in == len(a.records) + a.in_flight and a.in_flight == 0
    assert sum(r.kind == CONTEXT for r in a.records) == sum(p.kind == CONTEXT for p in trace)
