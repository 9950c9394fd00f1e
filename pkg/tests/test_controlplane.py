import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poise.compiler import compile_policy
from poise.controlplane import (
    ZERO_LATENCY, BaselineConfig, BaselineController, LatencyModel, LocalControlPlane, LogSink,
    logger_sink,
)
from poise.dataplane import CONTEXT, DATA, FlowKey, Packet, PipelineConfig, simulate
from poise.dataplane.switch import SwitchState

GATE = compile_policy("if match(x == 1) then fwd(server) else drop")


def cp(latency=LatencyModel(), capacity=1 << 20, seed=0):
    state = SwitchState(GATE, PipelineConfig(fullconn_capacity=capacity))
    return state, LocalControlPlane(state, latency, np.random.default_rng(seed))


# -- latency model ------------------------------------------------------------------

def test_latency_sampler_matches_numpy():
    lat = LatencyModel()
    assert lat.sample(np.random.default_rng(5)) == np.random.default_rng(5).lognormal(math.log(1e6), 0.5)
    rng = np.random.default_rng(1)
    draws = np.array([lat.sample(rng) for _ in range(20_000)])
    assert np.median(draws) == pytest.approx(1e6, rel=0.03)
    assert draws.mean() == pytest.approx(lat.mean(), rel=0.03)


def test_latency_kinds():
    rng = np.random.default_rng(0)
    assert ZERO_LATENCY.sample(rng) == 0.0 and ZERO_LATENCY.mean() == 0.0
    assert LatencyModel("constant", 7.0).sample(rng) == 7.0
    with pytest.raises(ValueError):
        LatencyModel("uniform")
    with pytest.raises(ValueError):
        LatencyModel("constant", -1.0)


# -- local control plane ------------------------------------------------------------

def test_request_ready_time():
    _, c = cp(seed=3)
    p = c.request_insert(FlowKey(1, 1, 6), "d", 0.0)
    assert p.ready_at == np.random.default_rng(3).lognormal(math.log(1e6), 0.5)
    assert p.ready_at >= p.requested_at


def test_coalescing():
    _, c = cp()
    k = FlowKey(1, 1, 6)
    a = c.request_insert(k, "old", 0.0)
    b = c.request_insert(k, "new", 10.0)
    assert a is b and c.requested == 1 and c.coalesced == 1
    assert b.decision == "new"


def test_pool_exhausted():
    state, c = cp(capacity=2)
    assert c.request_insert(FlowKey(1, 1, 6), "d", 0) is not None
    assert c.request_insert(FlowKey(1, 2, 6), "d", 0) is not None
    assert c.request_insert(FlowKey(1, 3, 6), "d", 0) is None
    assert c.refused == 1


def test_commit_ready():
    state, c = cp(LatencyModel("constant", 1e6))
    k = FlowKey(1, 1, 6)
    c.request_insert(k, "d", 0.0)
    assert c.commit_ready(999_999.0) == 0
    assert c.commit_ready(1e6) == 1
    assert state.R[state.fullconn[k]] == "d"


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1e7), min_size=1, max_size=100), st.integers(0, 1000))
def test_every_insert_is_committed_or_refused(times, cap):
    state, c = cp(LatencyModel("lognormal", 1e5, 1.0), capacity=max(cap, 1))
    for i, t in enumerate(sorted(times)):
        c.request_insert(FlowKey(1, i, 6), "d", t)
    total = 0
    for tick in np.linspace(0, 2e8, 50):
        total += c.commit_ready(tick)
    total += c.commit_ready(math.inf)
    assert total == c.requested == c.committed
    assert c.requested + c.refused == len(times)
    assert c.outstanding() == 0 and len(state.fullconn) == total


# -- baseline controller --------------------------------------------------------------

def test_baseline_single_request():
    cfg = BaselineConfig(rtt=LatencyModel("constant", 4e6))
    ctrl = BaselineController(cfg)
    assert ctrl.packet_in(0.0) == pytest.approx(1e9 / cfg.service_rate + 4e6)


def test_baseline_fifo_service():
    cfg = BaselineConfig(service_rate=1000, queue_capacity=3, rtt=LatencyModel("zero"))
    ctrl = BaselineController(cfg)
    done = [ctrl.packet_in(0.0) for _ in range(5)]
    assert done == [1e6, 2e6, 3e6, None, None]
    assert ctrl.queue_length(1.5e6) == 2
    assert ctrl.packet_in(1.5e6) == 4e6


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1e8), max_size=300), st.integers(1, 50))
def test_baseline_conservation(times, q):
    ctrl = BaselineController(BaselineConfig(service_rate=1e4, queue_capacity=q))
    for t in sorted(times):
        ctrl.packet_in(t)
        assert ctrl.queue_length(t) <= q
    assert ctrl.arrivals == ctrl.enqueued + ctrl.dropped == len(times)
    end = max(times, default=0.0) + 1e9
    assert ctrl.serviced(end) == ctrl.enqueued


def test_poise_never_waits_on_the_controller():
    key = FlowKey(0x0A000002, 40000, 6)
    trace = [Packet(CONTEXT, key, 0.0, 80, 0, 0, {"x": 1}, b"", 0),
             Packet(DATA, key, 1_000.0, 512, 0, 0, None, b"", 0)]
    slow = LatencyModel("constant", 5e8)
    poise = simulate(GATE, trace, insert_latency=slow).data()[0]
    assert poise.ts_out - poise.ts_in == 488 and poise.verdict == "fwd"
    base = simulate(GATE, trace, mode="baseline",
                    baseline=BaselineConfig(rtt=LatencyModel("constant", 4e6))).data()[0]
    assert base.ts_out - base.ts_in >= 4e6 and base.verdict == "fwd"


# -- logger -----------------------------------------------------------------------------

def test_log_sink_order_and_file(tmp_path):
    path = tmp_path / "log.jsonl"
    sink = LogSink(path)
    for i in range(2):
        pkt = Packet(DATA, FlowKey(1, i, 6), 0.0, flow=i)
        logger_sink(sink, pkt, 10.0 + i, "root.then")
    sink.close()
    lines = [json.loads(x) for x in path.read_text().splitlines()]
    assert [r["sport"] for r in lines] == [0, 1] == [r["sport"] for r in sink.records]
    assert lines[0]["branch"] == "root.then" and lines[1]["ts"] == 11.0


def test_only_log_verdicts_are_logged():
    prog = compile_policy("if match(x == 1) then log else fwd(server)")
    key = FlowKey(5, 5, 6)
    sink = LogSink()
    trace = [Packet(CONTEXT, key, 0.0, 80, 0, 0, {"x": 1}, b"", 0),
             Packet(DATA, key, 1e3, 512, 0, 0, None, b"", 0),
             Packet(DATA, key, 2e3, 512, 0, 0, None, b"", 0),
             Packet(CONTEXT, key, 3e3, 80, 0, 0, {"x": 2}, b"", 0),
             Packet(DATA, key, 4e3, 512, 0, 0, None, b"", 0)]
    res = simulate(prog, trace, insert_latency=ZERO_LATENCY, log_sink=sink)
    assert [r.verdict for r in res.data()] == ["log", "log", "fwd"]
    assert len(sink.records) == 2
