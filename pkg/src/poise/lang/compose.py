from __future__ import annotations

from dataclasses import fields as dc_fields, is_dataclass, replace

from .errors import CompositionError
from .syntax import MonitorRef, PolicyAst, par
from .validate import ValidatedPolicy


def _merge(kind, key, items, compare):
    out = {}
    for it in items:
        name = key(it)
        if name in out:
            if not compare(out[name], it):
                raise CompositionError(f"{kind} {name!r} declared differently in composed policies")
            continue
        out[name] = it
    return tuple(out.values())


def _rename_refs(node, mapping):
    if isinstance(node, MonitorRef):
        return MonitorRef(mapping.get(node.name, node.name), pos=node.pos)
    if isinstance(node, tuple):
        return tuple(_rename_refs(n, mapping) for n in node)
    if is_dataclass(node):
        changes = {}
        for f in dc_fields(node):
            if f.name == "pos":
                continue
            v = getattr(node, f.name)
            nv = _rename_refs(v, mapping)
            if nv is not v:
                changes[f.name] = nv
        return replace(node, **changes) if changes else node
    return node


def _dehoist(asts):
    # inline count() monitors get generated names; keep them apart across policies
    taken = {}
    out = []
    for a in asts:
        mapping = {}
        for m in a.monitors:
            if m.id.startswith("_count") and m.id in taken and taken[m.id] != m:
                n = 0
                while f"_count{n}" in taken or any(x.id == f"_count{n}" for x in a.monitors):
                    n += 1
                mapping[m.id] = f"_count{n}"
                taken[f"_count{n}"] = replace(m, id=f"_count{n}")
            else:
                taken.setdefault(m.id, m)
        if mapping:
            a = replace(a, monitors=tuple(replace(m, id=mapping.get(m.id, m.id)) for m in a.monitors),
                        body=_rename_refs(a.body, mapping))
        out.append(a)
    return out


def compose(policies):
    """Join policies into one by parallel composition, in input order.

    Declarations are merged by name; identical declarations are deduplicated
    and differing ones rejected.
    """
    asts = [p.ast if isinstance(p, ValidatedPolicy) else p for p in policies]
    if not asts:
        raise CompositionError("nothing to compose")
    if len(asts) == 1:
        return asts[0]
    asts = _dehoist(asts)

    def same_field(a, b):
        return (a.width, a.signed, a.header_name) == (b.width, b.signed, b.header_name)

    fields = _merge("field", lambda f: f.name, (f for a in asts for f in a.fields), same_field)
    lists = _merge("list", lambda x: x.name, (x for a in asts for x in a.lists), lambda a, b: a == b)
    consts = _merge("constant", lambda x: x.name, (x for a in asts for x in a.consts), lambda a, b: a == b)
    strings = _merge("string", lambda x: x.text, (x for a in asts for x in a.strings), lambda a, b: a == b)
    monitors = _merge("monitor", lambda x: x.id, (x for a in asts for x in a.monitors), lambda a, b: a == b)
    seen = {}
    for kind, group, key in (("field", fields, "name"), ("list", lists, "name"),
                             ("constant", consts, "name"), ("monitor", monitors, "id")):
        for it in group:
            name = getattr(it, key)
            if seen.setdefault(name, kind) != kind:
                raise CompositionError(f"{name!r} declared as both {seen[name]} and {kind}")
    ids = {}
    for s in strings:
        if ids.setdefault(s.value, s.text) != s.text:
            raise CompositionError(f"strings {ids[s.value]!r} and {s.text!r} share ID {s.value}")
    bodies = [a.body for a in asts if a.body is not None]
    body = par(bodies) if bodies else None
    name = "|".join(a.name for a in asts if a.name) or None
    return PolicyAst(fields, lists, consts, strings, monitors, body, name=name)
