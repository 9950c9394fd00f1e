"""Deterministic pseudo-P4 rendering and JSON serialization of switch programs."""
from __future__ import annotations

import json

from ..lang.syntax import Drop, Flood, Fwd, Log
from .ir import (
    AluOp, Branch, ContextLayout, LayoutField, MemorySummary, MonitorSpec, ResourceModel,
    SwitchProgram, TableSpec,
)

MAX_RENDERED_ENTRIES = 64
PROGRAM_FORMAT = "poise-program"
PROGRAM_VERSION = 1

_OPS = {
    "add": "+", "sub": "-", "mul": "*", "shr": ">>", "sar": ">>", "and": "&",
    "eq": "==", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">=",
}


def _operand(a, program):
    tag, v = a
    if tag == "const":
        return str(v)
    if tag == "temp":
        return f"meta.t{v}"
    if tag == "monitor":
        return f"meta.mon_{v}"
    return _field_path(v, program)


def _field_path(name, program):
    if name in program.builtins:
        return f"hdr.ipv4.{name}"
    for f in program.layout.fields:
        if f.name == name:
            return f"hdr.{f.header or f.name}.{name}"
    return f"hdr.ctx.{name}"


def _guard(g):
    tag = g[0]
    if tag == "true":
        return "true"
    if tag == "false":
        return "false"
    if tag == "flag":
        return f"meta.t{g[1]} == 1"
    if tag == "hit":
        return f"meta.m_{g[1]} == {g[2]}"
    if tag == "not":
        return f"!({_guard(g[1])})"
    op = "&&" if tag == "and" else "||"
    return f"({_guard(g[1])} {op} {_guard(g[2])})"


def _key(t):
    def one(k):
        if t.kind == "lpm":
            return f"{k[0]}/{k[1]}"
        if t.kind == "ternary":
            return f"{k[0]} &&& {k[1]}"
        return str(k)
    return one


def render(program: SwitchProgram) -> str:
    """Pseudo-P4 source for ``program``; identical programs render identically."""
    S = program.resources.stages
    out = [f"// poise switch program{f' {program.name}' if program.name else ''}",
           f"#define CONTEXT_PROTO {program.layout.protocol}",
           f"#define PASSES {program.rounds}", ""]
    headers = []
    for f in program.layout.fields:
        if (f.header or f.name) not in headers:
            headers.append(f.header or f.name)
    for h in headers:
        out.append(f"header {h}_t {{")
        for f in program.layout.fields:
            if (f.header or f.name) == h:
                out.append(f"    {'int' if f.signed else 'bit'}<{f.width}> {f.name};")
        out.append("}")
    out.append("struct context_t {")
    for h in headers:
        out.append(f"    {h}_t {h};")
    out.append("}")
    out.append("")
    out.append("struct poise_meta_t {")
    for op in program.alu:
        out.append(f"    bit<32> t{op.dst};")
    for t in program.tables:
        out.append(f"    bit<32> m_{t.id};")
    for m in program.monitors:
        out.append(f"    bit<{m.width}> mon_{m.id};")
    out.append("}")
    out.append("")
    for m in program.monitors:
        out.append(f"register<bit<{m.width}>>(1) {m.register};")
        out.append(f"register<bit<48>>(1) {m.ts_register};  // window {m.timeout_ns} ns")
    if program.monitors:
        out.append("")
    for t in program.tables:
        out.append(f"action set_{t.id}(bit<32> src) {{ meta.m_{t.id} = src; }}")
        out.append(f"table {t.id} {{  // pass {t.round + 1}, stage {t.stage}; {', '.join(t.sources[:4])}"
                   + (" ..." if len(t.sources) > 4 else ""))
        out.append(f"    key = {{ {_field_path(t.field, program)} : {t.kind}; }}")
        out.append(f"    actions = {{ set_{t.id}; }}")
        out.append(f"    size = {len(t.entries)};")
        out.append(f"    default_action = set_{t.id}({t.default});")
        fmt = _key(t)
        out.append("    const entries = {")
        for k, s in t.entries[:MAX_RENDERED_ENTRIES]:
            out.append(f"        {fmt(k)} : set_{t.id}({s});")
        if len(t.entries) > MAX_RENDERED_ENTRIES:
            out.append(f"        // ... {len(t.entries) - MAX_RENDERED_ENTRIES} more entries")
        out.append("    }")
        out.append("}")
    out.append("")
    out.append("control PoiseIngress(inout context_t hdr, inout poise_meta_t meta) {")
    out.append("    apply {")
    items = []
    for op in program.alu:
        sym = _OPS[op.op]
        a, b = (_operand(x, program) for x in op.args)
        cast = "(int<32>)" if op.signed else ""
        if op.op in ("eq", "ne", "lt", "le", "gt", "ge"):
            text = f"meta.t{op.dst} = ({cast}{a} {sym} {cast}{b}) ? 1 : 0;"
        else:
            text = f"meta.t{op.dst} = {cast}{a} {sym} {b};"
        items.append((op.stage, 0, text))
    for t in program.tables:
        items.append((t.round * S + t.stage, 1, f"{t.id}.apply();"))
    for m in program.monitors:
        items.append((m.stage, 2, f"if ({_guard(m.guard)}) {{ window_count({m.register}, "
                                  f"{m.ts_register}, {m.timeout_ns}); }}"))
        items.append((m.stage, 3, f"meta.mon_{m.id} = window_read({m.register}, "
                                  f"{m.ts_register}, {m.timeout_ns});"))
    items.sort(key=lambda x: (x[0], x[1]))
    current = None
    for stage, _, text in items:
        if stage // S != current:
            current = stage // S
            if current:
                out.append("        recirculate();")
            out.append(f"        // pass {current + 1}")
        out.append(f"        /* stage {stage % S} */ {text}")
    out.append("        // decision")
    for i, b in enumerate(program.branches):
        kw = "if" if i == 0 else "else if"
        out.append(f"        {kw} ({_guard(b.guard)}) {{ {_action(b.action)} }}  // {b.label}")
    tail = f"{_action(program.default_action)}"
    out.append(f"        {'else ' if program.branches else ''}{{ {tail} }}")
    out.append("    }")
    out.append("}")
    return "\n".join(out) + "\n"


def _action(a):
    if isinstance(a, Drop):
        return "mark_to_drop();"
    if isinstance(a, Fwd):
        return f"forward({a.port!r});".replace("'", '"')
    if isinstance(a, Flood):
        return "flood();"
    if isinstance(a, Log):
        return "clone_to_cpu();"
    raise TypeError(a)


# -- JSON --------------------------------------------------------------------

def action_to_json(a):
    if isinstance(a, Fwd):
        return {"action": "fwd", "port": a.port}
    return {"action": str(a)}


def action_from_json(d):
    kind = d["action"]
    if kind == "fwd":
        return Fwd(d["port"])
    return {"drop": Drop, "flood": Flood, "log": Log}[kind]()


def _guard_json(g):
    return [g[0]] + [(_guard_json(x) if isinstance(x, tuple) else x) for x in g[1:]]


def _guard_from(g):
    return tuple([g[0]] + [(_guard_from(x) if isinstance(x, list) else x) for x in g[1:]])


def _tupled(x):
    return tuple(_tupled(i) for i in x) if isinstance(x, list) else x


def program_to_json(p: SwitchProgram) -> dict:
    return {
        "format": PROGRAM_FORMAT,
        "version": PROGRAM_VERSION,
        "name": p.name,
        "layout": {"protocol": p.layout.protocol,
                   "fields": [[f.name, f.offset, f.width, f.signed, f.header] for f in p.layout.fields]},
        "builtins": list(p.builtins),
        "field_widths": [list(x) for x in p.field_widths],
        "alu": [[op.dst, op.op, [list(a) for a in op.args], op.signed, op.after_monitors, op.stage]
                for op in p.alu],
        "tables": [{"id": t.id, "field": t.field, "width": t.width, "kind": t.kind,
                    "entries": [[list(k) if isinstance(k, tuple) else k, s] for k, s in t.entries],
                    "sources": list(t.sources), "default": t.default, "round": t.round,
                    "stage": t.stage} for t in p.tables],
        "monitors": [{"id": m.id, "guard": _guard_json(m.guard), "timeout_ns": m.timeout_ns,
                      "width": m.width, "stage": m.stage} for m in p.monitors],
        "branches": [{"guard": _guard_json(b.guard), "action": action_to_json(b.action),
                      "label": b.label} for b in p.branches],
        "default_action": action_to_json(p.default_action),
        "rounds": p.rounds,
        "memory": {"sram_per_stage": list(p.memory.sram_per_stage),
                   "tcam_per_stage": list(p.memory.tcam_per_stage),
                   "sram_budget": p.memory.sram_budget, "tcam_budget": p.memory.tcam_budget,
                   "alus_per_stage": list(p.memory.alus_per_stage)},
        "resources": {k: getattr(p.resources, k) for k in ResourceModel.__dataclass_fields__},
    }


def program_from_json(d: dict) -> SwitchProgram:
    if d.get("format") != PROGRAM_FORMAT or d.get("version") != PROGRAM_VERSION:
        raise ValueError("not a poise program file (or unsupported version)")
    layout = ContextLayout(tuple(LayoutField(*f) for f in d["layout"]["fields"]), d["layout"]["protocol"])
    mem = d["memory"]
    return SwitchProgram(
        layout=layout,
        alu=tuple(AluOp(dst, op, tuple(tuple(a) for a in args), signed, post, stage)
                  for dst, op, args, signed, post, stage in d["alu"]),
        tables=tuple(TableSpec(t["id"], t["field"], t["width"], t["kind"],
                               tuple((_tupled(k), s) for k, s in t["entries"]),
                               tuple(t["sources"]), t["default"], t["round"], t["stage"])
                     for t in d["tables"]),
        monitors=tuple(MonitorSpec(m["id"], _guard_from(m["guard"]), m["timeout_ns"], m["width"], m["stage"])
                       for m in d["monitors"]),
        branches=tuple(Branch(_guard_from(b["guard"]), action_from_json(b["action"]), b["label"])
                       for b in d["branches"]),
        default_action=action_from_json(d["default_action"]),
        rounds=d["rounds"],
        memory=MemorySummary(tuple(mem["sram_per_stage"]), tuple(mem["tcam_per_stage"]),
                             mem["sram_budget"], mem["tcam_budget"], tuple(mem["alus_per_stage"])),
        resources=ResourceModel(**d["resources"]),
        builtins=tuple(d["builtins"]),
        field_widths=tuple(tuple(x) for x in d["field_widths"]),
        name=d.get("name"),
    )


def dump_program(p: SwitchProgram, path):
    with open(path, "w") as fh:
        json.dump(program_to_json(p), fh, sort_keys=True, separators=(",", ":"))


def load_program(path) -> SwitchProgram:
    with open(path) as fh:
        return program_from_json(json.load(fh))
