"""Synthetic unit policies for the scalability sweep.

A unit policy checks one value of one context type: ``ctx_j == v => fwd(server)``.
"""
from __future__ import annotations

from ..lang.syntax import Fwd
from .ir import Branch, ContextLayout, LayoutField, ProgramIR, ResourceError, ResourceModel, TableSpec
from .passes import allocate, collapse_stages

UNIT_ACTION = Fwd("server")


def type_name(j):
    return f"ctx{j}"


def unit_source(n, types):
    """Source text composing ``n`` unit policies for each of ``types`` context types."""
    decls = [f"field {type_name(j)} : bit<32>" for j in range(types)]
    parts = [f"(if match({type_name(j)} == {i}) then fwd(server))"
             for j in range(types) for i in range(n)]
    return "\n".join(decls) + "\n" + "\n| ".join(parts) + "\n"


def unit_ir(n, types, tables_only=False) -> ProgramIR:
    """The optimized-before-placement IR the full pipeline yields for :func:`unit_source`.

    Built directly so very large sweeps skip parsing and per-policy lowering.
    ``tables_only`` skips branches and entry labels, which placement ignores.
    """
    total = n * types
    single = total == 1
    tables, branches = [], []
    for j in range(types):
        name = type_name(j)
        tid = f"T{j * n}"
        tables.append(TableSpec(
            tid, name, 32, "exact",
            tuple((i, i + 1) for i in range(n)),
            () if tables_only else tuple(f"{name} == {i}" for i in range(n)),
        ))
        if tables_only:
            continue
        for i in range(n):
            label = "root.then" if single else f"root.{j * n + i}.then"
            branches.append(Branch(("hit", tid, i + 1), UNIT_ACTION, label))
    layout = ContextLayout(tuple(LayoutField(type_name(j), 32 * j, 32, False, type_name(j)) for j in range(types)))
    widths = tuple(sorted((type_name(j), 32, False) for j in range(types)))
    return ProgramIR(layout, (), tuple(tables), (), tuple(branches), (), widths)


def fits(n, types, resources: ResourceModel = ResourceModel()):
    try:
        allocate(collapse_stages(unit_ir(n, types, tables_only=True), resources), resources)
    except ResourceError:
        return False
    return True


def analytic_max_units(types, resources: ResourceModel = ResourceModel()):
    """Closed-form capacity: table slots bound the type count, pooled SRAM the entries."""
    if types > resources.stages * resources.tables_per_stage:
        return 0
    if -(-types // resources.stages) > resources.max_recirculations:
        return 0
    entry = TableSpec("", "", 32, "exact", ()).entry_bytes
    return resources.sram_bytes // resources.stages * resources.stages // (types * entry)


def max_units(types, resources: ResourceModel = ResourceModel()):
    """Largest per-type unit count that allocates.

    The closed form is confirmed against the allocator at n and n + 1; if
    they disagree the allocator wins via binary search.
    """
    n = analytic_max_units(types, resources)
    if n == 0:
        return 0 if not fits(1, types, resources) else _search(types, resources)
    if fits(n, types, resources) and not fits(n + 1, types, resources):
        return n
    return _search(types, resources)


def _search(types, resources):
    if not fits(1, types, resources):
        return 0
    lo, hi = 1, 2
    while fits(hi, types, resources):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fits(mid, types, resources):
            lo = mid
        else:
            hi = mid
    return lo
