"""Lowering of a validated policy to ALU ops, match tables, monitors and branches."""
from __future__ import annotations

from ..lang.syntax import (
    ACTION_TYPES, And, BinOp, BoolConst, Cmp, Const, FieldRef, If, Masked, Member,
    MonitorRef, Not, Or, Par, Prefix,
)
from ..lang.validate import WORD_BITS, ValidatedPolicy, fold_const, list_kind, validate
from .ir import AluOp, Branch, CompileError, ContextLayout, MonitorSpec, ProgramIR, TableSpec

M32 = 0xFFFFFFFF
TRUE = ("true",)
FALSE = ("false",)

_ARITH = {"+": "add", "-": "sub", "*": "mul"}
_CMP = {"==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}


def g_and(a, b):
    if a == TRUE:
        return b
    if b == TRUE:
        return a
    if FALSE in (a, b):
        return FALSE
    return ("and", a, b)


def g_or(a, b):
    if a == FALSE:
        return b
    if b == FALSE:
        return a
    if TRUE in (a, b):
        return TRUE
    return ("or", a, b)


def g_not(a):
    if a == TRUE:
        return FALSE
    if a == FALSE:
        return TRUE
    if a[0] == "not":
        return a[1]
    return ("not", a)


def walk_branches(body, path="root"):
    """Yield (conditions, action, label, path_nodes) for every leaf action.

    ``conditions`` is a tuple of (predicate, polarity); ``path_nodes`` records
    the composition nodes passed through, used to tell parallel siblings from
    if/else alternatives.
    """
    def rec(c, conds, label, trail):
        if isinstance(c, ACTION_TYPES):
            yield conds, c, label, trail
        elif isinstance(c, If):
            yield from rec(c.then, conds + ((c.pred, True),), label + ".then", trail + (("if", id(c), 0),))
            if c.orelse is not None:
                yield from rec(c.orelse, conds + ((c.pred, False),), label + ".else",
                               trail + (("if", id(c), 1),))
        elif isinstance(c, Par):
            for i, p in enumerate(c.parts):
                yield from rec(p, conds, f"{label}.{i}", trail + (("par", id(c), i),))
        else:
            raise CompileError(f"unexpected policy node {type(c).__name__}")
    if body is None:
        return
    yield from rec(body, (), path, ())


class Lowerer:
    def __init__(self, vp: ValidatedPolicy):
        self.vp = vp
        self.lists = {lst.name: lst.items for lst in vp.ast.lists}
        self.ops = []
        self.memo = {}
        self.post = set()
        self.tables = []

    # -- expressions ---------------------------------------------------------

    def is_signed(self, e):
        if isinstance(e, FieldRef):
            return self.vp.field(e.name).signed
        if isinstance(e, BinOp):
            return self.is_signed(e.left) or self.is_signed(e.right)
        return False

    def emit(self, op, args, signed):
        key = (op, args, signed)
        if key in self.memo:
            return ("temp", self.memo[key])
        dst = len(self.ops)
        post = any(a[0] == "monitor" or (a[0] == "temp" and a[1] in self.post) for a in args)
        if post:
            self.post.add(dst)
        self.ops.append(AluOp(dst, op, args, signed, post))
        self.memo[key] = dst
        return ("temp", dst)

    def operand(self, e):
        if isinstance(e, Const):
            return ("const", e.value & M32)
        if isinstance(e, FieldRef):
            if self.vp.field(e.name).width > WORD_BITS:
                raise CompileError(f"field {e.name!r} is too wide for ALU arithmetic")
            return ("field", e.name)
        if isinstance(e, MonitorRef):
            return ("monitor", e.name)
        if not isinstance(e, BinOp):
            raise CompileError(f"unexpected expression {type(e).__name__}")
        if e.op in ("/", "%"):
            d = fold_const(e.right)
            if d is None or d <= 0 or d & (d - 1):
                raise CompileError(f"unimplementable operation: '{e.op}' is only supported by a positive power-of-two constant")
            left = self.operand(e.left)
            k = d.bit_length() - 1
            if e.op == "/":
                if k == 0:
                    return left
                return self.emit("sar" if self.is_signed(e) else "shr", (left, ("const", k)), self.is_signed(e))
            return self.emit("and", (left, ("const", d - 1)), False)
        value = fold_const(e)
        if value is not None:
            return ("const", value & M32)
        return self.emit(_ARITH[e.op], (self.operand(e.left), self.operand(e.right)), False)

    # -- predicates ----------------------------------------------------------

    def table(self, fname, items, label):
        decl = self.vp.field(fname)
        w = decl.width
        mask = (1 << w) - 1
        kind = list_kind(items[0])
        entries = []
        for it in items:
            if isinstance(it, Prefix):
                key = (it.value & mask, it.length)
            elif isinstance(it, Masked):
                key = (it.value & mask, it.mask & mask)
            else:
                key = it.value & mask
            entries.append((key, 1))
        tid = f"T{len(self.tables)}"
        self.tables.append(TableSpec(tid, fname, w, kind, tuple(entries), (label,)))
        return ("hit", tid, 1)

    def guard(self, p):
        if isinstance(p, BoolConst):
            return TRUE if p.value else FALSE
        if isinstance(p, And):
            return g_and(self.guard(p.left), self.guard(p.right))
        if isinstance(p, Or):
            return g_or(self.guard(p.left), self.guard(p.right))
        if isinstance(p, Not):
            return g_not(self.guard(p.pred))
        if isinstance(p, Member):
            items = p.items if p.items is not None else self.lists[p.list]
            label = f"{p.field} in {p.list or 'prefix'}"
            return self.table(p.field, items, label)
        if isinstance(p, Cmp):
            if p.op in ("==", "!="):
                for f, c in ((p.left, p.right), (p.right, p.left)):
                    if isinstance(f, FieldRef) and isinstance(c, Const):
                        g = self.table(f.name, (c,), f"{f.name} == {c.value}")
                        return g if p.op == "==" else g_not(g)
            signed = self.is_signed(p.left) or self.is_signed(p.right)
            args = (self.operand(p.left), self.operand(p.right))
            return ("flag", self.emit(_CMP[p.op], args, signed)[1])
        raise CompileError(f"unexpected predicate {type(p).__name__}")

    # -- whole policy --------------------------------------------------------

    def run(self):
        ast = self.vp.ast
        monitors = tuple(MonitorSpec(m.id, self.guard(m.pred), m.window_ns) for m in ast.monitors)
        branches = []
        guards = {}
        for conds, action, label, _ in walk_branches(ast.body):
            g = TRUE
            for pred, pol in conds:
                # lowered once per if-node so both arms share the same tables
                if id(pred) not in guards:
                    guards[id(pred)] = self.guard(pred)
                g = g_and(g, guards[id(pred)] if pol else g_not(guards[id(pred)]))
            branches.append(Branch(g, action, label))
        names = sorted(set(self.vp.builtins) | {d.name for d in self.vp.layout})
        widths = tuple((n, self.vp.field(n).width, self.vp.field(n).signed) for n in names)
        return ProgramIR(
            layout=ContextLayout.from_decls(self.vp.layout),
            alu=tuple(self.ops),
            tables=tuple(self.tables),
            monitors=monitors,
            branches=tuple(branches),
            builtins=self.vp.builtins,
            field_widths=widths,
        )


def _validated(policy):
    return policy if isinstance(policy, ValidatedPolicy) else validate(policy)


def lower(policy) -> ProgramIR:
    return Lowerer(_validated(policy)).run()


def lower_expressions(policy):
    """ALU op list for every arithmetic expression and comparison in the policy."""
    return list(lower(policy).alu)


def build_tables(policy):
    """One match table per membership or field-equality predicate, before optimization."""
    return list(lower(policy).tables)


def compile_monitors(policy):
    return list(lower(policy).monitors)
