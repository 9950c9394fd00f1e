"""Name resolution and type checking for parsed policies."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field, replace
from typing import Dict, Tuple

from .errors import ValidationError
from .syntax import (
    And, BinOp, BoolConst, BUILTIN_FIELDS, Cmp, Const, ConstList, ContextFieldDecl,
    Count, DEFAULT_WINDOW_NS, FieldRef, If, Masked, Member, MonitorExpr, MonitorRef,
    Name, Not, Or, Par, PolicyAst, Prefix, StrLit, StringDef, ACTION_TYPES,
)

WORD_BITS = 32


def intern_string(text):
    """Stable 32-bit ID for a string not listed in the policy's string table."""
    return zlib.crc32(text.encode("utf-8"))


@dataclass(frozen=True)
class ValidatedPolicy:
    ast: PolicyAst
    layout: Tuple[ContextFieldDecl, ...]
    builtins: Tuple[str, ...]
    strings: Dict[str, int] = field(compare=False)

    def field(self, name):
        if name in BUILTIN_FIELDS:
            return ContextFieldDecl(name, BUILTIN_FIELDS[name])
        return self.ast.field_by_name(name)


def list_kind(item):
    if isinstance(item, Prefix):
        return "lpm"
    if isinstance(item, Masked):
        return "ternary"
    return "exact"


def fold_const(expr):
    """Value of an expression built only from constants, or None."""
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, BinOp) and expr.op in "+-*":
        a, b = fold_const(expr.left), fold_const(expr.right)
        if a is None or b is None:
            return None
        return {"+": a + b, "-": a - b, "*": a * b}[expr.op]
    return None


class _Validator:
    def __init__(self, ast):
        self.ast = ast
        self.fields = {}
        self.lists = {}
        self.consts = {}
        self.monitors = {}
        self.hoisted = []
        self.strings = {}
        self.names = {}
        self.order = []

    def declare(self, kind, name, pos):
        if name in self.names:
            raise ValidationError(f"duplicate declaration of {name!r} "
                                  f"(already a {self.names[name]})", pos)
        if name in BUILTIN_FIELDS:
            raise ValidationError(f"{name!r} is a built-in field", pos)
        self.names[name] = kind

    def run(self):
        ast = self.ast
        for s in ast.strings:
            if s.text in self.strings and self.strings[s.text] != s.value:
                raise ValidationError(f"duplicate declaration of string {s.text!r}", s.pos)
            if not 0 <= s.value < (1 << WORD_BITS):
                raise ValidationError(f"string ID {s.value} does not fit 32 bits", s.pos)
            self.strings[s.text] = s.value
        for f in ast.fields:
            self.declare("field", f.name, f.pos)
            if not 1 <= f.width <= 64:
                raise ValidationError(f"field {f.name!r} width {f.width} outside [1, 64]", f.pos)
            self.fields[f.name] = f
        for c in ast.consts:
            self.declare("constant", c.name, c.pos)
            self.consts[c.name] = self.expr(c.value, in_const=True)
        for lst in ast.lists:
            self.declare("list", lst.name, lst.pos)
            self.lists[lst.name] = self.list_items(lst.name, lst.items, lst.pos)
        for m in ast.monitors:
            self.declare("monitor", m.id, m.pos)
            if m.window_ns <= 0:
                raise ValidationError(f"monitor {m.id!r} window must be positive", m.pos)
            self.monitors[m.id] = m
        self.resolved = {}
        body = self.policy(ast.body) if ast.body is not None else None
        # unreferenced monitors are still compiled, after everything the body uses
        for m in ast.monitors:
            self.resolve_monitor(m.id)
        monitors = [self.resolved[m.id] for m in ast.monitors]
        monitors.extend(self.hoisted)

        layout = self.layout(monitors, body)
        builtins = []
        for name in self.order:
            if name in BUILTIN_FIELDS and name not in builtins:
                builtins.append(name)
        strings = tuple(StringDef(t, v) for t, v in sorted(self.strings.items(), key=lambda kv: kv[1]))
        new = PolicyAst(
            fields=tuple(self.fields.values()),
            lists=tuple(ConstList(n, items) for n, items in self.lists.items()),
            consts=(),
            strings=strings,
            monitors=tuple(monitors),
            body=body,
            name=ast.name,
        )
        return ValidatedPolicy(new, layout, tuple(builtins), dict(self.strings))

    # -- helpers -------------------------------------------------------------

    def resolve_monitor(self, mid):
        # a monitor's fields count as used where the monitor is first referenced
        if mid not in self.resolved:
            m = self.monitors[mid]
            self.resolved[mid] = replace(m, pred=self.pred(m.pred, in_monitor=True))

    def string_id(self, text):
        if text not in self.strings:
            self.strings[text] = intern_string(text)
        return self.strings[text]

    def field_decl(self, name, pos):
        if name in BUILTIN_FIELDS:
            return ContextFieldDecl(name, BUILTIN_FIELDS[name])
        kind = self.names.get(name)
        if kind is not None and kind != "field":
            raise ValidationError(f"{name!r} is a {kind}, not a field", pos)
        if name not in self.fields:
            # first use of an undeclared context field: default 32-bit unsigned
            self.declare("field", name, pos)
            self.fields[name] = ContextFieldDecl(name)
        return self.fields[name]

    def use_field(self, name, pos):
        decl = self.field_decl(name, pos)
        if name not in self.order:
            self.order.append(name)
        return decl

    def list_items(self, name, items, pos):
        if not items:
            raise ValidationError(f"list {name!r} is empty", pos)
        # strings and integers are distinct kinds even though both end up as IDs
        kinds = {"string" if isinstance(i, StrLit) else list_kind(i) for i in items}
        out = []
        for it in items:
            if isinstance(it, StrLit):
                it = Const(self.string_id(it.text), pos=it.pos)
            out.append(it)
        if len(kinds) > 1:
            raise ValidationError(f"list {name!r} mixes item kinds {sorted(kinds)}", pos)
        if len(set(out)) != len(out):
            raise ValidationError(f"list {name!r} has duplicate items", pos)
        return tuple(out)

    def check_fits(self, decl, value, pos):
        if not decl.lo <= value <= decl.hi:
            raise ValidationError(
                f"constant {value} overflows {decl.width}-bit "
                f"{'signed' if decl.signed else 'unsigned'} field {decl.name!r}", pos)

    def check_item(self, decl, item, pos):
        if isinstance(item, Const):
            self.check_fits(decl, item.value, pos)
        elif isinstance(item, Prefix):
            if not 0 <= item.length <= decl.width:
                raise ValidationError(f"prefix length {item.length} exceeds field {decl.name!r}", pos)
            if not 0 <= item.value < (1 << decl.width):
                raise ValidationError(f"prefix {item.value} overflows field {decl.name!r}", pos)
        elif isinstance(item, Masked):
            for v in (item.value, item.mask):
                if not 0 <= v < (1 << decl.width):
                    raise ValidationError(f"masked key {v} overflows field {decl.name!r}", pos)

    # -- expressions ---------------------------------------------------------

    def expr(self, e, in_const=False, in_monitor=False):
        if isinstance(e, Const):
            return e
        if isinstance(e, StrLit):
            return Const(self.string_id(e.text), pos=e.pos)
        if isinstance(e, BinOp):
            return BinOp(e.op, self.expr(e.left, in_const, in_monitor),
                         self.expr(e.right, in_const, in_monitor), pos=e.pos)
        if isinstance(e, (FieldRef, Name)):
            ident = e.name if isinstance(e, FieldRef) else e.ident
            if ident in self.consts:
                return self.consts[ident]
            if in_const:
                raise ValidationError(f"undeclared identifier {ident!r} in constant", e.pos)
            if ident in self.monitors:
                if in_monitor:
                    raise ValidationError(f"monitor {ident!r} used inside a monitor predicate", e.pos)
                self.resolve_monitor(ident)
                return MonitorRef(ident, pos=e.pos)
            if ident in self.lists:
                raise ValidationError(f"list {ident!r} used as a value", e.pos)
            decl = self.use_field(ident, e.pos)
            if decl.width > WORD_BITS:
                raise ValidationError(
                    f"field {ident!r} is wider than {WORD_BITS} bits; only equality and "
                    f"membership tests are supported on it", e.pos)
            return FieldRef(ident, pos=e.pos)
        if isinstance(e, MonitorRef):
            if in_monitor:
                raise ValidationError(f"monitor {e.name!r} used inside a monitor predicate", e.pos)
            if e.name not in self.monitors:
                raise ValidationError(f"undeclared identifier {e.name!r}", e.pos)
            self.resolve_monitor(e.name)
            return e
        if isinstance(e, Count):
            if in_const or in_monitor:
                raise ValidationError("count() not allowed here", e.pos)
            mid = f"_count{len(self.hoisted)}"
            while mid in self.names:
                mid = "_" + mid
            self.declare("monitor", mid, e.pos)
            window = e.window_ns if e.window_ns is not None else DEFAULT_WINDOW_NS
            if window <= 0:
                raise ValidationError("count() window must be positive", e.pos)
            m = MonitorExpr(mid, self.pred(e.pred, in_monitor=True), window, pos=e.pos)
            self.monitors[mid] = self.resolved[mid] = m
            self.hoisted.append(m)
            return MonitorRef(mid, pos=e.pos)
        raise ValidationError(f"unexpected expression node {type(e).__name__}")

    # -- predicates ----------------------------------------------------------

    def pred(self, p, in_monitor=False):
        if isinstance(p, BoolConst):
            return p
        if isinstance(p, And):
            return And(self.pred(p.left, in_monitor), self.pred(p.right, in_monitor), pos=p.pos)
        if isinstance(p, Or):
            return Or(self.pred(p.left, in_monitor), self.pred(p.right, in_monitor), pos=p.pos)
        if isinstance(p, Not):
            return Not(self.pred(p.pred, in_monitor), pos=p.pos)
        if isinstance(p, Member):
            decl = self.use_field(p.field, p.pos)
            if p.items is not None:
                items = self.list_items("prefix(...)", p.items, p.pos)
            else:
                if self.names.get(p.list) != "list":
                    raise ValidationError(f"undeclared identifier {p.list!r}", p.pos)
                items = self.lists[p.list]
            for it in items:
                self.check_item(decl, it, p.pos)
            return Member(p.field, p.list, items if p.items is not None else None, pos=p.pos)
        if isinstance(p, Cmp):
            # equality against a wide field is a membership-style test; keep the ref raw
            left = self._cmp_side(p.left, p.op, in_monitor)
            right = self._cmp_side(p.right, p.op, in_monitor)
            for a, b in ((left, right), (right, left)):
                if isinstance(a, FieldRef):
                    value = fold_const(b)
                    if value is not None:
                        self.check_fits(self.field_decl(a.name, a.pos), value, p.pos)
            return Cmp(p.op, left, right, pos=p.pos)
        raise ValidationError(f"unexpected predicate node {type(p).__name__}")

    def _cmp_side(self, e, op, in_monitor):
        if op in ("==", "!=") and isinstance(e, Name) and e.ident not in self.consts \
                and e.ident not in self.monitors and e.ident not in self.lists:
            decl = self.use_field(e.ident, e.pos)
            if decl.width > WORD_BITS:
                return FieldRef(e.ident, pos=e.pos)
        return self.expr(e, in_monitor=in_monitor)

    # -- policies ------------------------------------------------------------

    def policy(self, c):
        if isinstance(c, ACTION_TYPES):
            return c
        if isinstance(c, If):
            return If(self.pred(c.pred), self.policy(c.then),
                      self.policy(c.orelse) if c.orelse is not None else None, pos=c.pos)
        if isinstance(c, Par):
            return Par(tuple(self.policy(p) for p in c.parts), pos=c.pos)
        raise ValidationError(f"unexpected policy node {type(c).__name__}")

    # -- layout --------------------------------------------------------------

    def layout(self, monitors, body):
        # header-stack order follows first use; a header's fields stay together
        headers = []
        for name in self.order:
            if name in BUILTIN_FIELDS:
                continue
            h = self.fields[name].header_name
            if h not in headers:
                headers.append(h)
        out = []
        for h in headers:
            members = [f for f in self.fields.values() if f.header_name == h]
            used = [f for f in members if f.name in self.order]
            out.extend(used)
        return tuple(out)


def validate(ast):
    """Resolve names, intern strings, check widths; returns a :class:`ValidatedPolicy`."""
    if isinstance(ast, ValidatedPolicy):
        ast = ast.ast
    return _Validator(ast).run()
