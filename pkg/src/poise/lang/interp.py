"""Direct AST interpreter: the reference semantics for compiled programs.

Arithmetic is on 32-bit two's-complement words with wraparound. A comparison
is signed when either operand mentions a signed field. ``f == c`` and
``f != c`` on a bare field compare the raw field bits, like a table match.
"""
from __future__ import annotations

from .syntax import (
    ACTION_TYPES, And, BinOp, BoolConst, Cmp, Const, Drop, FieldRef, If, Masked, Member,
    MonitorRef, Not, Or, Par, Prefix,
)
from .validate import ValidatedPolicy

M32 = 0xFFFFFFFF


def _signed32(v):
    v &= M32
    return v - (1 << 32) if v & 0x80000000 else v


class Interpreter:
    def __init__(self, vp: ValidatedPolicy):
        self.vp = vp
        self.ast = vp.ast
        self.lists = {lst.name: lst.items for lst in self.ast.lists}

    def field_raw(self, name, ctx):
        decl = self.vp.field(name)
        return ctx[name] & ((1 << decl.width) - 1)

    def field_word(self, name, ctx):
        decl = self.vp.field(name)
        raw = self.field_raw(name, ctx)
        if decl.signed and raw >> (decl.width - 1):
            raw -= 1 << decl.width
        return raw & M32

    def is_signed(self, e):
        if isinstance(e, FieldRef):
            return self.vp.field(e.name).signed
        if isinstance(e, BinOp):
            return self.is_signed(e.left) or self.is_signed(e.right)
        return False

    def expr(self, e, ctx, mons):
        if isinstance(e, Const):
            return e.value & M32
        if isinstance(e, FieldRef):
            return self.field_word(e.name, ctx)
        if isinstance(e, MonitorRef):
            return mons.get(e.name, 0) & M32
        if isinstance(e, BinOp):
            a = self.expr(e.left, ctx, mons)
            b = self.expr(e.right, ctx, mons)
            if e.op == "+":
                return (a + b) & M32
            if e.op == "-":
                return (a - b) & M32
            if e.op == "*":
                return (a * b) & M32
            if self.is_signed(e):
                a, b = _signed32(a), _signed32(b)
            if b == 0:
                raise ZeroDivisionError("division by zero in policy expression")
            return (a // b if e.op == "/" else a % b) & M32
        raise TypeError(f"unexpected expression {e!r}")

    def member(self, p, ctx):
        decl = self.vp.field(p.field)
        w = decl.width
        raw = self.field_raw(p.field, ctx)
        items = p.items if p.items is not None else self.lists[p.list]
        for it in items:
            if isinstance(it, Prefix):
                shift = w - it.length
                if (raw >> shift) == ((it.value & ((1 << w) - 1)) >> shift):
                    return True
            elif isinstance(it, Masked):
                if raw & it.mask == it.value & it.mask:
                    return True
            elif raw == it.value & ((1 << w) - 1):
                return True
        return False

    def pred(self, p, ctx, mons):
        if isinstance(p, BoolConst):
            return p.value
        if isinstance(p, And):
            return self.pred(p.left, ctx, mons) and self.pred(p.right, ctx, mons)
        if isinstance(p, Or):
            return self.pred(p.left, ctx, mons) or self.pred(p.right, ctx, mons)
        if isinstance(p, Not):
            return not self.pred(p.pred, ctx, mons)
        if isinstance(p, Member):
            return self.member(p, ctx)
        if isinstance(p, Cmp):
            if p.op in ("==", "!="):
                for f, c in ((p.left, p.right), (p.right, p.left)):
                    if isinstance(f, FieldRef) and isinstance(c, Const):
                        w = self.vp.field(f.name).width
                        eq = self.field_raw(f.name, ctx) == c.value & ((1 << w) - 1)
                        return eq if p.op == "==" else not eq
            a = self.expr(p.left, ctx, mons)
            b = self.expr(p.right, ctx, mons)
            if self.is_signed(p.left) or self.is_signed(p.right):
                a, b = _signed32(a), _signed32(b)
            return {
                "==": a == b, "!=": a != b, "<": a < b,
                "<=": a <= b, ">": a > b, ">=": a >= b,
            }[p.op]
        raise TypeError(f"unexpected predicate {p!r}")

    def policy(self, c, ctx, mons):
        if isinstance(c, ACTION_TYPES):
            return c
        if isinstance(c, If):
            if self.pred(c.pred, ctx, mons):
                return self.policy(c.then, ctx, mons)
            return self.policy(c.orelse, ctx, mons) if c.orelse is not None else None
        if isinstance(c, Par):
            for part in c.parts:
                out = self.policy(part, ctx, mons)
                if out is not None:
                    return out
            return None
        raise TypeError(f"unexpected policy {c!r}")

    def evaluate(self, ctx, mons=None, default=Drop()):
        """Verdict for a packet context, given current monitor values."""
        if self.ast.body is None:
            return default
        out = self.policy(self.ast.body, ctx, mons or {})
        return default if out is None else out

    def monitor_hits(self, ctx):
        """IDs of monitors whose predicate holds for this context."""
        return [m.id for m in self.ast.monitors if self.pred(m.pred, ctx, {})]


class MonitorOracle:
    """Event-list replay of windowed counters, independent of the register model.

    A counter's value is the number of matching events in the current run of
    events, where a run ends once more than ``window`` elapses without one.
    """

    def __init__(self, monitors):
        self.windows = {m.id: m.window_ns for m in monitors}
        self.events = {m.id: [] for m in monitors}

    def record(self, mid, now):
        self.events[mid].append(now)

    def value(self, mid, now):
        ev = self.events[mid]
        if not ev or now - ev[-1] > self.windows[mid]:
            return 0
        n = 1
        for i in range(len(ev) - 1, 0, -1):
            if ev[i] - ev[i - 1] > self.windows[mid]:
                break
            n += 1
        return n

    def snapshot(self, now):
        return {mid: self.value(mid, now) for mid in self.events}


def evaluate_context(vp, ctx, now, oracle, interp=None):
    """Monitor-then-decide step used by oracles: record hits, then evaluate."""
    interp = interp or Interpreter(vp)
    for mid in interp.monitor_hits(ctx):
        oracle.record(mid, now)
    return interp.evaluate(ctx, oracle.snapshot(now))
