"""Table optimization and stage allocation."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .ir import MemorySummary, ProgramIR, ResourceError, ResourceModel, SwitchProgram


@dataclass(frozen=True)
class OptimizeOptions:
    dedup: bool = True
    merge: bool = True
    collapse: bool = True


def remap_guard(g, mapping):
    tag = g[0]
    if tag == "hit":
        return mapping.get((g[1], g[2]), g)
    if tag in ("and", "or"):
        return (tag, remap_guard(g[1], mapping), remap_guard(g[2], mapping))
    if tag == "not":
        return ("not", remap_guard(g[1], mapping))
    return g


def _apply(ir, tables, mapping):
    if not mapping:
        return replace(ir, tables=tuple(tables))
    return replace(
        ir,
        tables=tuple(tables),
        monitors=tuple(replace(m, guard=remap_guard(m.guard, mapping)) for m in ir.monitors),
        branches=tuple(replace(b, guard=remap_guard(b.guard, mapping)) for b in ir.branches),
    )


def dedup_tables(ir: ProgramIR) -> ProgramIR:
    """Tables with the same field, kind and key set collapse into one."""
    keep, mapping, seen = [], {}, {}
    for t in ir.tables:
        key = (t.field, t.kind, t.key_set())
        # only single-source tables are candidates; merged ones carry several actions
        if len({s for _, s in t.entries}) != 1:
            keep.append(t)
            continue
        if key in seen:
            first = seen[key]
            mapping[(t.id, t.entries[0][1])] = ("hit", first.id, first.entries[0][1])
            continue
        seen[key] = t
        keep.append(t)
    return _apply(ir, keep, mapping)


def merge_tables(ir: ProgramIR) -> ProgramIR:
    """Exact tables on one field with pairwise disjoint keys share a single table.

    At most one member can hit for a given key, so each member keeps a
    distinct source id in the merged table's metadata.
    """
    groups = {}
    order = []
    for t in ir.tables:
        if t.kind != "exact":
            order.append(t)
            continue
        bucket = groups.setdefault(t.field, [])
        for g in bucket:
            if g["keys"].isdisjoint(k for k, _ in t.entries):
                g["members"].append(t)
                g["keys"].update(k for k, _ in t.entries)
                break
        else:
            g = {"members": [t], "keys": set(k for k, _ in t.entries)}
            bucket.append(g)
            order.append(g)
    tables, mapping = [], {}
    for item in order:
        if not isinstance(item, dict):
            tables.append(item)
            continue
        members = item["members"]
        if len(members) == 1:
            tables.append(members[0])
            continue
        head = members[0]
        entries, sources = [], []
        for t in members:
            local = {}
            for s in sorted({s for _, s in t.entries}):
                local[s] = len(sources) + 1
                sources.append(t.sources[s - 1] if s - 1 < len(t.sources) else t.id)
                mapping[(t.id, s)] = ("hit", head.id, local[s])
            entries.extend((k, local[s]) for k, s in t.entries)
        tables.append(replace(head, entries=tuple(entries), sources=tuple(sources)))
    return _apply(ir, tables, mapping)


def collapse_stages(ir: ProgramIR, resources: ResourceModel) -> ProgramIR:
    """Spread tables over ``ceil(n / S)`` pipeline passes, one lookup per stage per pass."""
    S = resources.stages
    tables = tuple(replace(t, round=i // S, stage=i % S) for i, t in enumerate(ir.tables))
    rounds = max(1, math.ceil(len(tables) / S))
    return replace(ir, tables=tables, rounds=rounds)


def optimize(ir: ProgramIR, resources: ResourceModel = ResourceModel(),
             options: OptimizeOptions = OptimizeOptions()) -> ProgramIR:
    if options.dedup:
        ir = dedup_tables(ir)
    if options.merge:
        ir = merge_tables(ir)
    if options.collapse:
        ir = collapse_stages(ir, resources)
    return ir


def _guard_refs(g, temps, tables):
    tag = g[0]
    if tag == "flag":
        temps.append(g[1])
    elif tag == "hit":
        tables.append(g[1])
    elif tag in ("and", "or"):
        _guard_refs(g[1], temps, tables)
        _guard_refs(g[2], temps, tables)
    elif tag == "not":
        _guard_refs(g[1], temps, tables)


def allocate(ir: ProgramIR, resources: ResourceModel = ResourceModel(),
             default_action=None, name=None) -> SwitchProgram:
    """Assign pipeline stages and memory, or raise :class:`ResourceError`."""
    from ..lang.syntax import Drop

    S, T = resources.stages, resources.tables_per_stage
    n_tables = len(ir.tables)
    if n_tables > S * T:
        raise ResourceError("tables", f"{n_tables} tables exceed {S} stages x {T} tables")

    tables = list(ir.tables)
    if any(t.stage < 0 for t in tables):
        if n_tables > S:
            raise ResourceError("stages", f"{n_tables} tables need more than {S} stages in one pass")
        tables = [replace(t, round=0, stage=i) for i, t in enumerate(tables)]
    per_stage = [0] * S
    for t in tables:
        per_stage[t.stage] += 1
    if max(per_stage, default=0) > T:
        raise ResourceError("tables", f"{max(per_stage)} tables in one stage exceed {T}")

    # global stage index = pass * S + physical stage
    table_at = {t.id: t.round * S + t.stage for t in tables}
    alu_load = {}
    temp_at = {}

    def place_alu(op, floor):
        stage = floor
        for a in op.args:
            if a[0] == "temp":
                stage = max(stage, temp_at[a[1]] + 1)
        while alu_load.get(stage, 0) >= resources.alus_per_stage:
            stage += 1
        alu_load[stage] = alu_load.get(stage, 0) + 1
        temp_at[op.dst] = stage
        return replace(op, stage=stage)

    placed = {}
    for op in ir.alu:
        if not op.after_monitors:
            placed[op.dst] = place_alu(op, 0)
    monitors, mon_at = [], {}
    for m in ir.monitors:
        temps, tids = [], []
        _guard_refs(m.guard, temps, tids)
        stage = max([temp_at[t] + 1 for t in temps] + [table_at[t] + 1 for t in tids] + [0])
        mon_at[m.id] = stage
        monitors.append(replace(m, stage=stage))
    for op in ir.alu:
        if op.after_monitors:
            floor = max((mon_at[a[1]] + 1 for a in op.args if a[0] == "monitor"), default=0)
            placed[op.dst] = place_alu(op, floor)
    alu = tuple(placed[op.dst] for op in ir.alu)

    last = max(list(table_at.values()) + list(temp_at.values()) + list(mon_at.values()) + [0])
    rounds = max(1, math.ceil((last + 1) / S), ir.rounds)
    if rounds > resources.max_recirculations:
        raise ResourceError("recirculations",
                            f"{rounds} pipeline passes exceed the limit of {resources.max_recirculations}")
    stage_alu = [0] * S
    for st, n in alu_load.items():
        stage_alu[st % S] += n
    if max(stage_alu) > resources.alus_per_stage * rounds:
        raise ResourceError("stages", "ALU operations exceed per-stage capacity")

    sram = [0] * S
    tcam = [0] * S
    sram_cap, tcam_cap = resources.sram_per_stage, resources.tcam_per_stage
    for t in tables:
        used, cap = (tcam, tcam_cap) if t.memory == "tcam" else (sram, sram_cap)
        need = t.size_bytes
        # home stage first; overflow spills into the other stages' pools
        for k in range(S):
            if need == 0:
                break
            s = (t.stage + k) % S
            take = min(need, cap - used[s])
            if take > 0:
                used[s] += take
                need -= take
        if need:
            kind = "TCAM" if t.memory == "tcam" else "SRAM"
            raise ResourceError(kind, f"table {t.id} on {t.field!r} does not fit "
                                      f"({t.size_bytes} bytes, {len(t.entries)} entries)")
    for m in monitors:
        s = m.stage % S
        # counter plus a 48-bit last-update timestamp
        need = math.ceil(m.width / 8) + 6
        for k in range(S):
            s2 = (s + k) % S
            take = min(need, sram_cap - sram[s2])
            if take > 0:
                sram[s2] += take
                need -= take
            if need == 0:
                break
        if need:
            raise ResourceError("SRAM", f"no register space for monitor {m.id!r}")

    memory = MemorySummary(tuple(sram), tuple(tcam), sram_cap * S, tcam_cap * S, tuple(stage_alu))
    return SwitchProgram(
        layout=ir.layout,
        alu=alu,
        tables=tuple(tables),
        monitors=tuple(monitors),
        branches=ir.branches,
        default_action=default_action if default_action is not None else Drop(),
        rounds=rounds,
        memory=memory,
        resources=resources,
        builtins=ir.builtins,
        field_widths=ir.field_widths,
        name=name,
    )
