"""Intermediate representation of a compiled switch program.

Guards are nested tuples over 1-bit pipeline metadata:

    ("true",) | ("false",)
    ("flag", temp)              result of an ALU comparison
    ("hit", table_id, source)   the table's action wrote ``source`` into its metadata
    ("and", g, g) | ("or", g, g) | ("not", g)

ALU operands are ``("field", name)``, ``("temp", n)``, ``("monitor", id)`` or
``("const", value)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

CONTEXT_PROTOCOL = 253


class CompileError(Exception):
    pass


class ConflictError(CompileError):
    def __init__(self, msg, first=None, second=None):
        super().__init__(msg)
        self.first = first
        self.second = second


class ResourceError(CompileError):
    def __init__(self, resource, msg):
        super().__init__(f"{resource}: {msg}")
        self.resource = resource


@dataclass(frozen=True)
class ResourceModel:
    stages: int = 5
    tables_per_stage: int = 8
    # sized so one 32-bit context holds exactly 1.2M exact entries of 5 bytes
    sram_bytes: int = 6_000_000
    tcam_bytes: int = 1_310_720
    alus_per_stage: int = 32
    max_recirculations: int = 8

    def __post_init__(self):
        for name in ("stages", "tables_per_stage", "sram_bytes", "tcam_bytes",
                     "alus_per_stage", "max_recirculations"):
            if getattr(self, name) <= 0:
                raise ValueError(f"resource model {name} must be positive")

    @property
    def sram_per_stage(self):
        return self.sram_bytes // self.stages

    @property
    def tcam_per_stage(self):
        return self.tcam_bytes // self.stages

    @classmethod
    def from_mapping(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown resource model keys: {sorted(unknown)}")
        return cls(**{k: int(v) for k, v in data.items()})

    @classmethod
    def load(cls, path):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return cls.from_mapping(tomllib.load(fh))


@dataclass(frozen=True)
class LayoutField:
    name: str
    offset: int
    width: int
    signed: bool = False
    header: Optional[str] = None


@dataclass(frozen=True)
class ContextLayout:
    fields: Tuple[LayoutField, ...] = ()
    protocol: int = CONTEXT_PROTOCOL

    @classmethod
    def from_decls(cls, decls, protocol=CONTEXT_PROTOCOL):
        out, off = [], 0
        for d in decls:
            out.append(LayoutField(d.name, off, d.width, d.signed, d.header_name))
            off += d.width
        return cls(tuple(out), protocol)

    @property
    def total_bits(self):
        return sum(f.width for f in self.fields)

    @property
    def total_bytes(self):
        return math.ceil(self.total_bits / 8)

    def field(self, name):
        for f in self.fields:
            if f.name == name:
                return f
        raise KeyError(name)

    def names(self):
        return [f.name for f in self.fields]


@dataclass(frozen=True)
class AluOp:
    dst: int
    op: str
    args: Tuple[tuple, ...]
    signed: bool = False
    after_monitors: bool = False
    stage: int = -1


@dataclass(frozen=True)
class TableSpec:
    id: str
    field: str
    width: int
    kind: str
    entries: Tuple[tuple, ...]
    sources: Tuple[str, ...] = ()
    default: int = 0
    round: int = 0
    stage: int = -1

    @property
    def memory(self):
        return "tcam" if self.kind == "ternary" else "sram"

    @property
    def entry_bytes(self):
        if self.kind == "ternary":
            return 2 * math.ceil(self.width / 8)
        return math.ceil((self.width + 8) / 8)

    @property
    def size_bytes(self):
        return len(self.entries) * self.entry_bytes

    def key_set(self):
        return frozenset(k for k, _ in self.entries)


@dataclass(frozen=True)
class MonitorSpec:
    id: str
    guard: tuple
    timeout_ns: int
    width: int = 32
    stage: int = -1

    @property
    def register(self):
        return f"reg_{self.id}"

    @property
    def ts_register(self):
        return f"reg_{self.id}_ts"


@dataclass(frozen=True)
class Branch:
    guard: tuple
    action: object
    label: str = ""


@dataclass(frozen=True)
class ProgramIR:
    layout: ContextLayout
    alu: Tuple[AluOp, ...]
    tables: Tuple[TableSpec, ...]
    monitors: Tuple[MonitorSpec, ...]
    branches: Tuple[Branch, ...]
    builtins: Tuple[str, ...] = ()
    field_widths: Tuple[Tuple[str, int, bool], ...] = ()
    rounds: int = 1


@dataclass(frozen=True)
class MemorySummary:
    sram_per_stage: Tuple[int, ...]
    tcam_per_stage: Tuple[int, ...]
    sram_budget: int
    tcam_budget: int
    alus_per_stage: Tuple[int, ...] = ()

    @property
    def sram_used(self):
        return sum(self.sram_per_stage)

    @property
    def tcam_used(self):
        return sum(self.tcam_per_stage)

    @property
    def sram_utilization(self):
        return self.sram_used / self.sram_budget

    @property
    def tcam_utilization(self):
        return self.tcam_used / self.tcam_budget


@dataclass(frozen=True)
class SwitchProgram:
    layout: ContextLayout
    alu: Tuple[AluOp, ...]
    tables: Tuple[TableSpec, ...]
    monitors: Tuple[MonitorSpec, ...]
    branches: Tuple[Branch, ...]
    default_action: object
    rounds: int
    memory: MemorySummary
    resources: ResourceModel = field(default_factory=ResourceModel)
    builtins: Tuple[str, ...] = ()
    field_widths: Tuple[Tuple[str, int, bool], ...] = ()
    name: Optional[str] = None

    @property
    def recirculations(self):
        return self.rounds

    @property
    def context_types(self):
        return len(self.tables)

    def stages_used(self):
        stages = {t.stage for t in self.tables}
        stages.update(op.stage % self.resources.stages for op in self.alu)
        return sorted(stages)

    def tables_per_stage(self):
        counts = [0] * self.resources.stages
        for t in self.tables:
            counts[t.stage] += 1
        return counts

    def actions(self):
        seen = []
        for b in self.branches:
            if b.action not in seen:
                seen.append(b.action)
        if self.default_action not in seen:
            seen.append(self.default_action)
        return seen

    def with_name(self, name):
        return replace(self, name=name)
