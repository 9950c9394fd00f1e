"""Execution of a compiled SwitchProgram on one packet context."""
from __future__ import annotations

from typing import NamedTuple

from ..compiler.ir import SwitchProgram

M32 = 0xFFFFFFFF


def _s32(v):
    return v - (1 << 32) if v & 0x80000000 else v


class Decision(NamedTuple):
    action: object
    branch: str


class MonitorRegisters:
    """Value and last-event timestamp register per monitor."""

    def __init__(self, monitors):
        self.timeout = {m.id: m.timeout_ns for m in monitors}
        self.value = {m.id: 0 for m in monitors}
        self.last = {m.id: None for m in monitors}

    def update(self, mid, now):
        last = self.last[mid]
        if last is None or now - last > self.timeout[mid]:
            self.value[mid] = 1
        else:
            self.value[mid] = (self.value[mid] + 1) & M32
        self.last[mid] = now

    def read(self, mid, now):
        last = self.last[mid]
        if last is None or now - last > self.timeout[mid]:
            self.value[mid] = 0
            return 0
        return self.value[mid]

    def snapshot(self, now):
        return {mid: self.read(mid, now) for mid in self.value}


class _Lookup:
    def __init__(self, t):
        self.kind = t.kind
        self.width = t.width
        self.mask = (1 << t.width) - 1
        self.default = t.default
        if t.kind == "exact":
            self.exact = {}
            for k, s in t.entries:
                self.exact.setdefault(k, s)
        elif t.kind == "lpm":
            # longest prefix first; stable on ties
            self.rules = sorted(((plen, v, s) for (v, plen), s in t.entries), key=lambda r: -r[0])
        else:
            self.rules = [(v & m, m, s) for (v, m), s in t.entries]

    def __call__(self, raw):
        if self.kind == "exact":
            return self.exact.get(raw, self.default)
        if self.kind == "lpm":
            for plen, v, s in self.rules:
                shift = self.width - plen
                if raw >> shift == v >> shift:
                    return s
            return self.default
        for v, m, s in self.rules:
            if raw & m == v:
                return s
        return self.default


def _compile_guard(g):
    tag = g[0]
    if tag == "true":
        return lambda meta, temps: True
    if tag == "false":
        return lambda meta, temps: False
    if tag == "flag":
        i = g[1]
        return lambda meta, temps: temps[i] == 1
    if tag == "hit":
        tid, sid = g[1], g[2]
        return lambda meta, temps: meta[tid] == sid
    if tag == "not":
        f = _compile_guard(g[1])
        return lambda meta, temps: not f(meta, temps)
    a, b = _compile_guard(g[1]), _compile_guard(g[2])
    if tag == "and":
        return lambda meta, temps: a(meta, temps) and b(meta, temps)
    return lambda meta, temps: a(meta, temps) or b(meta, temps)


_CMP = {
    "eq": lambda a, b: a == b, "ne": lambda a, b: a != b, "lt": lambda a, b: a < b,
    "le": lambda a, b: a <= b, "gt": lambda a, b: a > b, "ge": lambda a, b: a >= b,
}


class Evaluator:
    """Runs ALU ops, table lookups, monitor updates and branch logic of a program."""

    def __init__(self, program: SwitchProgram):
        self.program = program
        self.widths = {n: (w, s) for n, w, s in program.field_widths}
        self.tables = [(t.id, t.field, _Lookup(t)) for t in program.tables]
        self.pre = [op for op in program.alu if not op.after_monitors]
        self.post = [op for op in program.alu if op.after_monitors]
        self.monitors = [(m.id, _compile_guard(m.guard)) for m in program.monitors]
        self.branches = [(_compile_guard(b.guard), Decision(b.action, b.label)) for b in program.branches]
        self.default = Decision(program.default_action, "default")

    def raw(self, ctx, name):
        w, _ = self.widths[name]
        return ctx.get(name, 0) & ((1 << w) - 1)

    def word(self, ctx, name):
        w, signed = self.widths[name]
        v = ctx.get(name, 0) & ((1 << w) - 1)
        if signed and v >> (w - 1):
            v -= 1 << w
        return v & M32

    def _operand(self, a, ctx, temps, mons):
        tag, v = a
        if tag == "const":
            return v
        if tag == "temp":
            return temps[v]
        if tag == "monitor":
            return mons.get(v, 0) & M32
        return self.word(ctx, v)

    def _run(self, ops, ctx, temps, mons):
        for op in ops:
            a = self._operand(op.args[0], ctx, temps, mons)
            b = self._operand(op.args[1], ctx, temps, mons)
            kind = op.op
            if kind == "add":
                r = (a + b) & M32
            elif kind == "sub":
                r = (a - b) & M32
            elif kind == "mul":
                r = (a * b) & M32
            elif kind == "shr":
                r = a >> b
            elif kind == "sar":
                r = (_s32(a) >> b) & M32
            elif kind == "and":
                r = a & b
            else:
                if op.signed:
                    a, b = _s32(a), _s32(b)
                r = 1 if _CMP[kind](a, b) else 0
            temps[op.dst] = r

    def prepare(self, ctx):
        """Pre-monitor state: table metadata and ALU temporaries."""
        meta = {tid: lookup(self.raw(ctx, f)) for tid, f, lookup in self.tables}
        temps = {}
        self._run(self.pre, ctx, temps, {})
        return meta, temps

    def monitor_hits(self, ctx, prepared=None):
        meta, temps = prepared or self.prepare(ctx)
        return [mid for mid, g in self.monitors if g(meta, temps)]

    def decide(self, ctx, mons=None, prepared=None) -> Decision:
        meta, temps = prepared or self.prepare(ctx)
        if self.post:
            temps = dict(temps)
            self._run(self.post, ctx, temps, mons or {})
        for g, d in self.branches:
            if g(meta, temps):
                return d
        return self.default

    def process(self, ctx, regs: MonitorRegisters, now) -> Decision:
        """Context-packet step: update matching monitors, then read and decide."""
        prepared = self.prepare(ctx)
        if self.monitors:
            for mid in self.monitor_hits(ctx, prepared):
                regs.update(mid, now)
            mons = regs.snapshot(now)
        else:
            mons = {}
        return self.decide(ctx, mons, prepared)


def eval_policy(program: SwitchProgram, ctx, monitors=None, now=0):
    """Verdict of ``program`` on ``ctx``; ``monitors`` is a register bank or a value map."""
    ev = Evaluator(program)
    if isinstance(monitors, MonitorRegisters):
        mons = monitors.snapshot(now)
    else:
        mons = dict(monitors or {})
    return ev.decide(ctx, mons).action
