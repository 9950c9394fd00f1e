"""Static conflict detection for parallel composition.

Two branches that sit in different parts of a parallel composition and carry
different actions conflict if some context satisfies both guards. Guards are
abstracted as DNF over per-variable integer interval sets. Atoms outside the
``var op const`` fragment become opaque boolean variables, which keeps the
check sound (no missed overlaps) while still recognising ``p`` against ``!p``.
"""
from __future__ import annotations

import itertools
from typing import Dict, List, Tuple

from ..lang.pretty import pred as pred_text
from ..lang.syntax import And, BoolConst, Cmp, Const, FieldRef, Masked, Member, MonitorRef, Not, Or, Prefix
from ..lang.validate import ValidatedPolicy, fold_const, validate
from .ir import ConflictError
from .lower import walk_branches

MAX_TERMS = 4096
M32 = 0xFFFFFFFF

Intervals = Tuple[Tuple[int, int], ...]


def norm(ivs) -> Intervals:
    out = []
    for a, b in sorted(iv for iv in ivs if iv[0] <= iv[1]):
        if out and a <= out[-1][1] + 1:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return tuple(out)


def intersect(x: Intervals, y: Intervals) -> Intervals:
    out, i, j = [], 0, 0
    while i < len(x) and j < len(y):
        a, b = max(x[i][0], y[j][0]), min(x[i][1], y[j][1])
        if a <= b:
            out.append((a, b))
        if x[i][1] < y[j][1]:
            i += 1
        else:
            j += 1
    return tuple(out)


def complement(x: Intervals, lo, hi) -> Intervals:
    out, cur = [], lo
    for a, b in x:
        if a > cur:
            out.append((cur, a - 1))
        cur = max(cur, b + 1)
    if cur <= hi:
        out.append((cur, hi))
    return tuple(out)


class _Abstraction:
    def __init__(self, vp: ValidatedPolicy):
        self.vp = vp
        self.lists = {lst.name: lst.items for lst in vp.ast.lists}

    def domain(self, var):
        kind, name = var[0], var[1]
        if kind == "field":
            d = self.vp.field(name)
            if d.width <= 32:
                return d.lo, d.hi
            return 0, (1 << d.width) - 1
        if kind == "monitor":
            return 0, M32
        return 0, 1

    def natural(self, name, raw):
        d = self.vp.field(name)
        if d.signed and d.width <= 32 and raw >> (d.width - 1):
            return raw - (1 << d.width)
        return raw

    def raw_range(self, name, a, b):
        """Natural-value intervals for the raw bit range [a, b]."""
        d = self.vp.field(name)
        if not d.signed or d.width > 32:
            return ((a, b),)
        half = 1 << (d.width - 1)
        parts = []
        if a < half:
            parts.append((a, min(b, half - 1)))
        if b >= half:
            parts.append((max(a, half) - (1 << d.width), b - (1 << d.width)))
        return norm(parts)

    def member(self, p):
        d = self.vp.field(p.field)
        mask = (1 << d.width) - 1
        items = p.items if p.items is not None else self.lists[p.list]
        ivs = []
        for it in items:
            if isinstance(it, Prefix):
                span = d.width - it.length
                lo = ((it.value & mask) >> span) << span
                ivs.extend(self.raw_range(p.field, lo, lo + (1 << span) - 1))
            elif isinstance(it, Masked):
                if it.mask & mask != mask:
                    return None
                v = it.value & mask
                ivs.extend(self.raw_range(p.field, v, v))
            else:
                v = it.value & mask
                ivs.extend(self.raw_range(p.field, v, v))
        return ("field", p.field), norm(ivs)

    def atom(self, p):
        """(var, intervals) for an atom, with opaque atoms as a boolean variable."""
        if isinstance(p, Member):
            out = self.member(p)
            if out is not None:
                return out
            return ("atom", p), ((1, 1),)
        out = self.cmp(p)
        if out is not None:
            return out
        return ("atom", p), ((1, 1),)

    def cmp(self, p: Cmp):
        left, right, op = p.left, p.right, p.op
        flip = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}
        if fold_const(left) is not None and isinstance(right, (FieldRef, MonitorRef)):
            left, right, op = right, left, flip[op]
        c = fold_const(right)
        if c is None:
            return None
        if isinstance(left, FieldRef):
            d = self.vp.field(left.name)
            var = ("field", left.name)
            if op in ("==", "!=") and isinstance(right, Const):
                v = self.natural(left.name, right.value & ((1 << d.width) - 1))
            elif d.width > 32:
                return None
            else:
                v = c & M32
                if d.signed and v >> 31:
                    v -= 1 << 32
        elif isinstance(left, MonitorRef):
            var = ("monitor", left.name)
            v = c & M32
        else:
            return None
        lo, hi = self.domain(var)
        ivs = {
            "==": ((v, v),), "<": ((lo, v - 1),), "<=": ((lo, v),),
            ">": ((v + 1, hi),), ">=": ((v, hi),),
        }.get(op)
        if op == "!=":
            ivs = complement(((v, v),), lo, hi)
        return var, intersect(norm(ivs), ((lo, hi),))

    def dnf(self, p, positive=True) -> List[Dict]:
        """DNF terms, each a dict var -> intervals; None means too large to track."""
        if isinstance(p, Not):
            return self.dnf(p.pred, not positive)
        if isinstance(p, BoolConst):
            return [{}] if p.value == positive else []
        if isinstance(p, (And, Or)):
            conj = isinstance(p, And) == positive
            a, b = self.dnf(p.left, positive), self.dnf(p.right, positive)
            if a is None or b is None:
                return None
            if not conj:
                return a + b
            return product(a, b)
        var, ivs = self.atom(p)
        if not positive:
            ivs = complement(ivs, *self.domain(var))
        return [{var: ivs}] if ivs else []


def conjoin(t1, t2):
    out = dict(t1)
    for var, ivs in t2.items():
        if var in out:
            ivs = intersect(out[var], ivs)
            if not ivs:
                return None
        out[var] = ivs
    return out


def product(a, b):
    if a is None or b is None:
        return None
    if len(a) * len(b) > MAX_TERMS:
        return None
    out = []
    for x, y in itertools.product(a, b):
        t = conjoin(x, y)
        if t is not None:
            out.append(t)
    return out


def overlaps(a, b):
    if a is None or b is None:
        return True
    return any(conjoin(x, y) is not None for x in a for y in b)


def _split_at_par(t1, t2):
    for x, y in zip(t1, t2):
        if x[:2] != y[:2]:
            return False
        if x[2] != y[2]:
            return x[0] == "par"
    return False


def detect_conflicts(policy):
    """Raise :class:`ConflictError` if composed branches can disagree on a context."""
    vp = policy if isinstance(policy, ValidatedPolicy) else validate(policy)
    absn = _Abstraction(vp)
    branches = []
    cache = {}
    for conds, action, label, trail in walk_branches(vp.ast.body):
        terms = [{}]
        for p, pol in conds:
            key = (id(p), pol)
            if key not in cache:
                cache[key] = absn.dnf(p, pol)
            terms = product(terms, cache[key]) if terms is not None else None
        if terms == []:
            continue
        branches.append((action, label, trail, terms, conds))
    by_action = {}
    for b in branches:
        by_action.setdefault(b[0], []).append(b)
    groups = list(by_action.values())
    for gi, ga in enumerate(groups):
        for gb in groups[gi + 1:]:
            for a in ga:
                for b in gb:
                    if not _split_at_par(a[2], b[2]):
                        continue
                    if overlaps(a[3], b[3]):
                        raise ConflictError(
                            f"conflicting actions {a[0]} ({a[1]}: {_describe(a[4])}) and "
                            f"{b[0]} ({b[1]}: {_describe(b[4])}) can match the same context",
                            a[1], b[1])
    return True


def _describe(conds):
    if not conds:
        return "always"
    return " & ".join(pred_text(p) if pol else f"!({pred_text(p)})" for p, pol in conds)
