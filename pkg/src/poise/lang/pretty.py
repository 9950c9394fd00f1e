"""Render a PolicyAst back to source text that reparses to an equal AST."""
from __future__ import annotations

import json

from .syntax import (
    ACTION_TYPES, And, BinOp, BoolConst, Cmp, Const, Count, DEFAULT_WINDOW_NS, FieldRef,
    If, Masked, Member, MonitorRef, Name, Not, Or, Par, Prefix, StrLit,
)


def _duration(ns):
    for unit, scale in (("s", 10**9), ("ms", 10**6), ("us", 10**3)):
        if ns % scale == 0:
            return f"{ns // scale}{unit}"
    return f"{ns}ns"


def _type(f):
    return f"int<{f.width}>" if f.signed else f"bit<{f.width}>"


def _item(it):
    if isinstance(it, StrLit):
        return json.dumps(it.text)
    if isinstance(it, Prefix):
        return f"{it.value}/{it.length}"
    if isinstance(it, Masked):
        return f"{it.value} &&& {it.mask}"
    return str(it.value)


def expr(e):
    if isinstance(e, Const):
        return str(e.value)
    if isinstance(e, StrLit):
        return json.dumps(e.text)
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, FieldRef):
        return e.name
    if isinstance(e, MonitorRef):
        return e.name
    if isinstance(e, Count):
        window = f", {_duration(e.window_ns)}" if e.window_ns is not None else ""
        return f"count({pred(e.pred)}{window})"
    if isinstance(e, BinOp):
        return f"({expr(e.left)} {e.op} {expr(e.right)})"
    raise TypeError(f"cannot print {e!r}")


def pred(p):
    if isinstance(p, BoolConst):
        return "true" if p.value else "false"
    if isinstance(p, Cmp):
        return f"{expr(p.left)} {p.op} {expr(p.right)}"
    if isinstance(p, Member):
        if p.items is not None:
            return f"{p.field} in prefix({', '.join(_item(i) for i in p.items)})"
        return f"{p.field} in {p.list}"
    if isinstance(p, And):
        return f"({pred(p.left)} & {pred(p.right)})"
    if isinstance(p, Or):
        return f"({pred(p.left)} | {pred(p.right)})"
    if isinstance(p, Not):
        return f"!({pred(p.pred)})"
    raise TypeError(f"cannot print {p!r}")


def policy(c, indent=0):
    pad = "  " * indent
    if isinstance(c, ACTION_TYPES):
        return pad + str(c)
    if isinstance(c, If):
        out = f"{pad}if match({pred(c.pred)})\n{pad}then (\n{policy(c.then, indent + 1)}\n{pad})"
        if c.orelse is not None:
            out += f"\n{pad}else (\n{policy(c.orelse, indent + 1)}\n{pad})"
        return out
    if isinstance(c, Par):
        inner = f"\n{pad}|\n".join(f"{pad}(\n{policy(p, indent + 1)}\n{pad})" for p in c.parts)
        return inner
    raise TypeError(f"cannot print {c!r}")


def pretty(ast):
    lines = []
    for s in ast.strings:
        lines.append(f"string {json.dumps(s.text)} = {s.value}")
    printed = set()
    for f in ast.fields:
        if f.header is None:
            lines.append(f"field {f.name} : {_type(f)}")
        elif f.header not in printed:
            printed.add(f.header)
            members = [g for g in ast.fields if g.header == f.header]
            body = "; ".join(f"{g.name} : {_type(g)}" for g in members)
            lines.append(f"header {f.header} {{ {body} }}")
    for c in ast.consts:
        lines.append(f"def {c.name} = {expr(c.value)}")
    for lst in ast.lists:
        lines.append(f"def {lst.name} = [{', '.join(_item(i) for i in lst.items)}]")
    for m in ast.monitors:
        window = "" if m.window_ns == DEFAULT_WINDOW_NS else f", {_duration(m.window_ns)}"
        lines.append(f"{m.id} = count({pred(m.pred)}{window})")
    if ast.body is not None:
        lines.append(policy(ast.body))
    return "\n".join(lines) + "\n"
