"""Metrics derived from a simulation, and the versioned CSV format."""
from __future__ import annotations

import csv
import io
import os
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..dataplane.config import SECOND
from ..dataplane.packet import CONTEXT
from ..dataplane.sim import SimResult

CSV_MAGIC = "# poise-metrics v1"


def latency_stats(values) -> Dict[str, float]:
    if len(values) == 0:
        return {"n": 0, "min": float("nan"), "median": float("nan"), "p99": float("nan"),
                "max": float("nan")}
    a = np.asarray(values, dtype=float)
    return {"n": int(a.size), "min": float(a.min()), "median": float(np.median(a)),
            "p99": float(np.percentile(a, 99)), "max": float(a.max())}


def first_data_outcomes(records, tag=None):
    """Per flow: the verdict record of its first data packet (by ingress time)."""
    first = {}
    for r in records:
        if r.kind != "data" or (tag is not None and r.tag != tag):
            continue
        cur = first.get(r.flow)
        if cur is None or r.ts_in < cur.ts_in:
            first[r.flow] = r
    return first


def connection_success(records, tag="legit", timeout_ns: float = SECOND):
    """Fraction of ``tag`` flows whose first data packet was forwarded within the timeout."""
    first = first_data_outcomes(records, tag)
    if not first:
        return float("nan"), []
    ok = [r for r in first.values() if r.verdict == "fwd" and r.ts_out - r.ts_in <= timeout_ns]
    return len(ok) / len(first), [r.ts_out - r.ts_in for r in ok]


def posture_changes(decisions):
    """Commit delay of every decision that changed an existing flow's verdict."""
    last = {}
    out = []
    for d in sorted(decisions, key=lambda d: (d.ts_commit, d.ts_in)):
        prev = last.get(d.flow)
        if prev is not None and (prev.verdict, prev.port) != (d.verdict, d.port):
            out.append(d.ts_commit - d.ts_in)
        last[d.flow] = d
    return out


@dataclass
class MetricsReport:
    packets_in: int
    in_flight: int
    verdicts: Dict[str, int]
    latency: Dict[str, float]
    recirculations: Dict[int, int]
    occupancy: List[tuple] = field(default_factory=list)
    bf_false_positives: int = 0
    legit_success: float = float("nan")
    deltas: List[float] = field(default_factory=list)
    context_overhead: float = 0.0
    counters: Dict[str, int] = field(default_factory=dict)

    @property
    def verdicts_out(self):
        return sum(self.verdicts.values())

    def conserved(self):
        return self.packets_in == self.verdicts_out + self.in_flight

    def rows(self):
        out = [("packets", "in", self.packets_in), ("packets", "out", self.verdicts_out),
               ("packets", "in_flight", self.in_flight)]
        out += [("verdict", k, v) for k, v in sorted(self.verdicts.items())]
        out += [("latency_ns", k, v) for k, v in self.latency.items()]
        out += [("recirculations", str(k), v) for k, v in sorted(self.recirculations.items())]
        out += [("bf", "false_positives", self.bf_false_positives),
                ("legit", "success_rate", self.legit_success),
                ("context", "overhead_Bps", self.context_overhead)]
        out += [("delta_ns", k, v) for k, v in latency_stats(self.deltas).items()]
        out += [("counter", k, v) for k, v in sorted(self.counters.items())]
        for t, fc, cache in self.occupancy:
            out += [("occupancy_fullconn", fmt(t), fc), ("occupancy_cache", fmt(t), cache)]
        return out


def summarize(result: SimResult, trace=None, tag="legit", timeout_ns: float = SECOND) -> MetricsReport:
    data = [r for r in result.records if r.kind == "data"]
    verdicts = Counter(r.verdict for r in result.records)
    success, _ = connection_success(result.records, tag, timeout_ns)
    overhead = 0.0
    if trace is not None and result.horizon > 0:
        overhead = sum(e.packet.size for e in trace if e.packet.kind == CONTEXT) / (result.horizon / SECOND)
    return MetricsReport(
        packets_in=result.packets_in, in_flight=result.in_flight, verdicts=dict(verdicts),
        latency=latency_stats([r.ts_out - r.ts_in for r in data]),
        recirculations=dict(Counter(r.passes for r in data)),
        occupancy=list(result.occupancy),
        bf_false_positives=result.counters.get("bf_false_positives", 0),
        legit_success=success, deltas=posture_changes(result.decisions),
        context_overhead=overhead, counters=dict(result.counters))


# -- CSV ---------------------------------------------------------------------

def fmt(v):
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        if v != v:
            return "nan"
        return repr(round(v, 6))
    return str(v)


def csv_text(kind: str, columns: Sequence[str], rows, meta: Optional[dict] = None) -> str:
    buf = io.StringIO()
    extra = "".join(f" {k}={meta[k]}" for k in sorted(meta or {}))
    buf.write(f"{CSV_MAGIC} kind={kind}{extra}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_csv(path, kind, columns, rows, meta=None):
    """Atomic write: a failed run never leaves a partial file behind."""
    text = csv_text(kind, columns, rows, meta)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)
    return path


def read_csv(path):
    """(kind, meta, rows as dicts) of a metrics CSV."""
    with open(path, newline="") as fh:
        head = fh.readline().rstrip("\n")
        if not head.startswith(CSV_MAGIC):
            raise ValueError(f"{path}: not a poise metrics file")
        parts = head[len(CSV_MAGIC):].split()
        meta = dict(p.split("=", 1) for p in parts)
        kind = meta.pop("kind", "")
        return kind, meta, list(csv.DictReader(fh))
