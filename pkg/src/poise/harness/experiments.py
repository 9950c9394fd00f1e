"""Named experiments wiring compiler, workload and simulator together."""
from __future__ import annotations

import ipaddress
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .. import corpus
from ..compiler import ResourceError, ResourceModel, compile_policy
from ..compiler.passes import allocate, collapse_stages
from ..compiler.unitgen import max_units, unit_ir
from ..controlplane.baseline import BaselineConfig
from ..controlplane.local import LatencyModel
from ..controlplane.logger import LogSink
from ..dataplane.config import SECOND, PipelineConfig
from ..dataplane.packet import FlowKey
from ..dataplane.sim import Simulator, write_verdict_log
from ..lang import parse, validate
from ..lang.syntax import Log
from ..lang.validate import intern_string
from ..workload.io import read_trace
from ..workload.traces import (
    SERVER_IP, ClientSpec, gen_agility_probe, gen_client_trace, gen_eviction_attack,
    gen_saturation_attack, sort_trace,
)
from .config import ConfigError, ExperimentConfig, parse_action
from .metrics import connection_success, latency_stats, summarize, write_csv

log = logging.getLogger("poise.harness")

# desk-scale controller: attack rates are swept up to 100x its service rate
SCALED_BASELINE = BaselineConfig(service_rate=1_000.0, queue_capacity=5_000)


@dataclass
class Table:
    kind: str
    columns: List[str]
    rows: List[list]
    meta: Dict[str, object] = field(default_factory=dict)

    def write(self, path):
        return write_csv(path, self.kind, self.columns, self.rows, self.meta)

    def dicts(self):
        return [dict(zip(self.columns, r)) for r in self.rows]


# -- helpers -------------------------------------------------------------------

def ip(v) -> int:
    return int(ipaddress.IPv4Address(v)) if isinstance(v, str) else int(v)


def resolve_values(values, vp):
    """Context values with string IDs replaced by their 32-bit encodings."""
    out = {}
    for k, v in values.items():
        out[k] = vp.strings.get(v, intern_string(v)) if isinstance(v, str) else int(v)
    return out


def fill_values(values, vp, layout):
    """Generator context values: fields left unspecified are zero."""
    out = {f.name: 0 for f in layout.fields}
    out.update(resolve_values(values, vp))
    return out


def build_program(source, resources=ResourceModel(), default_action=None, name=None):
    vp = validate(parse(source, name=name))
    action = parse_action(default_action) if isinstance(default_action, str) else default_action
    return vp, compile_policy(vp, resources, default_action=action, name=name)


def _policy_source(policy):
    if policy in corpus.NAMES:
        return corpus.source(policy)
    path = Path(policy)
    if not path.is_file():
        raise ConfigError(f"policy file not found: {path}")
    return path.read_text(encoding="utf-8")


def _seeds(seed, n):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def _client(d, vp, layout):
    d = dict(d)
    sched = d.pop("schedule", [[0, {}]])
    d["schedule"] = tuple((float(t) * SECOND, fill_values(v, vp, layout)) for t, v in sched)
    d["sip"] = ip(d["sip"])
    if "dip" in d:
        d["dip"] = ip(d["dip"])
    d.pop("start_s", None)
    if d.get("context_freq_hz") == "inf":
        d["context_freq_hz"] = float("inf")
    return ClientSpec(**d)


def generate_trace(spec, vp, layout, seed):
    """Trace from a generator spec (a ``kind`` plus parameters, or a list of ``parts``)."""
    if "parts" in spec:
        parts = spec["parts"]
        out = []
        for part, s in zip(parts, _seeds(seed, len(parts))):
            out.extend(e.packet for e in generate_trace(part, vp, layout, s))
        return sort_trace(out)
    kind = spec.get("kind")
    if kind == "clients":
        horizon = float(spec.get("horizon_s", 100.0)) * SECOND
        out = []
        clients = spec.get("clients", [])
        for i, (c, s) in enumerate(zip(clients, _seeds(seed, len(clients)))):
            cs = _client(c, vp, layout)
            start = float(c.get("start_s", 0.0)) * SECOND
            out.extend(e.packet for e in gen_client_trace(cs, horizon, s, layout, flow_base=1000 * i,
                                                          start_ns=start))
        return sort_trace(out)
    if kind == "saturation":
        sips = [ip(x) for x in spec["sips"]] if "sips" in spec else None
        return gen_saturation_attack(float(spec.get("rate", 1e3)), float(spec.get("duration_s", 1.0)) * SECOND,
                                     seed, sips=sips, values=fill_values(spec.get("values", {}), vp, layout),
                                     layout=layout, start_ns=float(spec.get("start_s", 0.0)) * SECOND)
    if kind == "eviction":
        v = spec["victim"]
        victim = FlowKey(ip(v["sip"]), int(v["sport"]), int(v.get("proto", 6)))
        trace, _ = gen_eviction_attack(victim, ip(spec["attacker_sip"]), float(spec.get("rate", 1e3)),
                                       float(spec.get("duration_s", 1.0)) * SECOND, seed,
                                       values=fill_values(spec.get("values", {}), vp, layout), layout=layout,
                                       start_ns=float(spec.get("start_s", 0.0)) * SECOND)
        return trace
    if kind == "agility":
        k = spec.get("key", {})
        key = FlowKey(ip(k.get("sip", "10.0.0.100")), int(k.get("sport", 40000)), int(k.get("proto", 6)))
        return gen_agility_probe(key, fill_values(spec["allow"], vp, layout),
                                 fill_values(spec["deny"], vp, layout),
                                 float(spec.get("t_change_s", 1.0)) * SECOND, layout,
                                 n_data=int(spec.get("n_data", 40)), flip=bool(spec.get("flip", True)),
                                 dip=ip(spec.get("dip", SERVER_IP)))
    raise ConfigError(f"unknown trace kind {kind!r}")


def load_trace(cfg: ExperimentConfig, vp, program):
    f = cfg.trace_file()
    if f is not None:
        trace, _ = read_trace(f)
        return trace
    if not cfg.trace:
        raise ConfigError("config has no trace section")
    return generate_trace(cfg.trace, vp, program.layout, cfg.seed)


# -- run -----------------------------------------------------------------------

def run(cfg: ExperimentConfig, out_dir=None, write: bool = True):
    """Compile, load or generate the trace, simulate, summarize and write the CSV."""
    cfg.check_files()
    vp, program = build_program(cfg.policy_source(), cfg.resources, cfg.default_action,
                                name=Path(cfg.policy).stem)
    trace = load_trace(cfg, vp, program)
    out = Path(out_dir if out_dir is not None else cfg.resolve(cfg.out))
    sink = None
    if any(isinstance(a, Log) for a in list(program.actions()) + [program.default_action]):
        if write:
            out.mkdir(parents=True, exist_ok=True)
        sink = LogSink(out / f"{cfg.name}.log.jsonl" if write else None)
    sample = cfg.params.get("sample_interval_s")
    sim = Simulator(program, cfg.mode, cfg.pipeline, cfg.insert_latency, cfg.baseline, seed=cfg.seed,
                    log_sink=sink, sample_interval_ns=float(sample) * SECOND if sample else None)
    log.info("simulating %d packets (%s)", len(trace), cfg.mode)
    result = sim.run(trace)
    if sink is not None:
        sink.close()
    report = summarize(result, trace)
    path = None
    if write:
        path = write_csv(out / f"{cfg.name}.csv", "run", ["metric", "key", "value"], report.rows(),
                         {"seed": cfg.seed, "mode": cfg.mode})
        if cfg.params.get("verdict_log"):
            write_verdict_log(result, out / f"{cfg.name}.verdicts.jsonl")
    return report, result, path


# -- scalability -----------------------------------------------------------------

def exp_scalability(resources: ResourceModel = ResourceModel(), pipeline: PipelineConfig = PipelineConfig(),
                    max_types: int = 41, context_pps: float = 1e6, context_size: int = 80,
                    seed: int = 0) -> Table:
    """Max checks per context, passes, context latency and recirculation traffic per type count.

    Recirculation traffic assumes ``context_pps`` context packets of ``context_size``
    bytes per second, each recirculated once per extra pass.
    """
    rows = []
    for k in range(1, max_types + 1):
        n = max_units(k, resources)
        try:
            prog = allocate(collapse_stages(unit_ir(1, k), resources), resources)
        except ResourceError as exc:
            rows.append([k, n, "", "", "", f"ResourceError:{exc.resource}"])
            continue
        r = prog.rounds
        passes = r if r > 1 else 0
        gbps = passes * context_pps * context_size * 8 / 1e9
        rows.append([k, n, r, pipeline.context_delay(r), gbps, "ok"])
    return Table("scalability", ["types", "max_checks", "rounds", "context_latency_ns",
                                 "recirc_gbps", "status"], rows, {"seed": seed})


# -- saturation ------------------------------------------------------------------

def _legit_trace(vp, layout, values, n_legit, start_s, window_s, flow_s, seed):
    rng = np.random.default_rng(seed)
    starts = np.sort(rng.uniform(start_s, start_s + window_s, n_legit))
    out = []
    for i, (t0, s) in enumerate(zip(starts, _seeds(seed, n_legit))):
        spec = ClientSpec(ip("10.0.1.0") + i + 1, ((0.0, values),), data_rate_pps=20.0)
        t0 = float(t0) * SECOND
        out.extend(e.packet for e in gen_client_trace(spec, t0 + flow_s * SECOND, s, layout,
                                                      flow_base=i, start_ns=t0))
    return out


def exp_saturation(rates: Sequence[float] = (0, 1e2, 1e3, 1e4, 1e5), seed: int = 0,
                   policy: str = "p3", allow=None, baseline: BaselineConfig = SCALED_BASELINE,
                   pipeline: PipelineConfig = PipelineConfig(),
                   insert_latency: LatencyModel = LatencyModel(),
                   attack_duration_s: float = 1.0, n_legit: int = 50, legit_start_s: float = 0.2,
                   legit_window_s: float = 0.7, legit_flow_s: float = 0.5,
                   timeout_ns: float = SECOND) -> Table:
    """Legitimate connection success and first-packet latency, Poise vs the reactive baseline."""
    vp, program = build_program(_policy_source(policy), name=Path(policy).stem)
    allow = resolve_values(allow if allow is not None else {"lat": 0, "lon": 0}, vp)
    legit_seed, *attack_seeds = _seeds(seed, len(rates) + 1)
    legit = _legit_trace(vp, program.layout, allow, n_legit, legit_start_s, legit_window_s,
                         legit_flow_s, legit_seed)
    baseline = replace(baseline, connection_timeout_ns=timeout_ns)
    rows = []
    for rate, aseed in zip(rates, attack_seeds):
        packets = list(legit)
        n_attack = 0
        if rate > 0:
            atk = gen_saturation_attack(rate, attack_duration_s * SECOND, aseed, values=allow,
                                        layout=program.layout)
            n_attack = len(atk) // 2
            packets += [e.packet for e in atk]
        trace = sort_trace(packets)
        for arch in ("poise", "baseline"):
            sim = Simulator(program, arch, pipeline, insert_latency, baseline, seed=aseed)
            res = sim.run(trace)
            ok, lat = connection_success(res.records, "legit", timeout_ns)
            st = latency_stats(lat)
            c = res.counters
            rows.append([rate, arch, n_legit, ok, st["median"], st["p99"], n_attack,
                         c.get("ctrl_dropped", 0), c.get("cache_deferred", 0)])
            log.info("saturation rate=%g %s success=%.3f", rate, arch, ok)
    return Table("saturation", ["rate", "arch", "legit_flows", "success_rate", "latency_median_ns",
                                "latency_p99_ns", "attack_flows", "controller_drops", "cache_deferred"],
                 rows, {"seed": seed, "mu": baseline.service_rate, "queue": baseline.queue_capacity})


def saturation_summary(table: Table):
    """Per architecture: unloaded median latency and the row at the highest rate."""
    d = table.dicts()
    out = {}
    for arch in ("poise", "baseline"):
        rows = sorted((r for r in d if r["arch"] == arch), key=lambda r: r["rate"])
        out[arch] = {"unloaded": rows[0], "max": rows[-1]}
    return out


# -- agility and the window of vulnerability ---------------------------------------

PROBE_KEY = FlowKey(ip("10.0.0.100"), 40000, 6)


def _delta(res, t_change):
    """Commit delay of the flip decision, and ingress offset of the first data drop after it."""
    dec = [d for d in res.decisions if d.tag == "probe" and d.ts_in == t_change]
    delta = dec[0].ts_commit - dec[0].ts_in if dec else float("inf")
    drops = [r.ts_in for r in res.records
             if r.tag == "probe" and r.kind == "data" and r.ts_in > t_change and r.verdict == "drop"]
    return delta, (min(drops) - t_change if drops else float("inf"))


def exp_agility(seed: int = 0, policy: str = "p3", allow=None, deny=None,
                baseline: BaselineConfig = SCALED_BASELINE, pipeline: PipelineConfig = PipelineConfig(),
                insert_latency: LatencyModel = LatencyModel(), load_rate: float = 1e4,
                load_lead_s: float = 0.3, load_duration_s: float = 1.0, t_change_s: float = 1.0,
                warmup_s: float = 0.5, n_probe: int = 48, n_illegal: int = 20,
                illegal_gap_ns: float = 1e6) -> Table:
    """δ per architecture, unloaded and under saturation, and the staged illegal-request replay.

    The staged attack: saturate the controller, flip the flow's context to a
    denied value, then issue requests that the new posture must block.
    """
    vp, program = build_program(_policy_source(policy), name=Path(policy).stem)
    allow = resolve_values(allow if allow is not None else {"lat": 0, "lon": 0}, vp)
    deny = resolve_values(deny if deny is not None else {"lat": 2000, "lon": 0}, vp)
    t_change = t_change_s * SECOND
    probe = gen_agility_probe(PROBE_KEY, allow, deny, t_change, program.layout, n_data=n_probe,
                              warmup_ns=warmup_s * SECOND)
    staged = gen_agility_probe(PROBE_KEY, allow, deny, t_change, program.layout, n_data=n_illegal,
                               first_gap_ns=illegal_gap_ns, growth=1.0, warmup_ns=warmup_s * SECOND)
    load = gen_saturation_attack(load_rate, load_duration_s * SECOND, seed, values=allow,
                                 layout=program.layout, start_ns=t_change - load_lead_s * SECOND)
    rows = []
    for scenario in ("unloaded", "loaded"):
        extra = [e.packet for e in load] if scenario == "loaded" else []
        for arch in ("poise", "baseline"):
            res = Simulator(program, arch, pipeline, insert_latency, baseline, seed=seed).run(
                sort_trace([e.packet for e in probe] + extra))
            delta, delta_data = _delta(res, t_change)
            res2 = Simulator(program, arch, pipeline, insert_latency, baseline, seed=seed).run(
                sort_trace([e.packet for e in staged] + extra))
            illegal = [r for r in res2.records
                       if r.tag == "probe" and r.kind == "data" and r.ts_in > t_change]
            accepted = sum(1 for r in illegal if r.verdict == "fwd")
            rows.append([scenario, arch, delta, delta_data, len(illegal), accepted])
            log.info("agility %s %s delta=%g accepted=%d", scenario, arch, delta, accepted)
    return Table("agility", ["scenario", "arch", "delta_ns", "delta_data_ns", "illegal_sent",
                             "illegal_accepted"], rows, {"seed": seed, "load_rate": load_rate})


EXPERIMENTS = {"scalability": exp_scalability, "saturation": exp_saturation, "agility": exp_agility}


def experiment_kwargs(name, cfg: Optional[ExperimentConfig]):
    """Keyword arguments for an experiment from a config's ``params`` and model sections."""
    if cfg is None:
        return {}
    kw = dict(cfg.params)
    kw["seed"] = cfg.seed
    if name == "scalability":
        kw.update(resources=cfg.resources, pipeline=cfg.pipeline)
    else:
        kw.update(pipeline=cfg.pipeline, insert_latency=cfg.insert_latency)
        scaled = {k: kw.pop(k) for k in ("service_rate", "queue_capacity") if k in kw}
        if scaled:
            kw["baseline"] = replace(SCALED_BASELINE, **scaled)
        if "rates" in kw:
            kw["rates"] = tuple(float(r) for r in kw["rates"])
    return kw
