"""Policy AST node types.

Nodes are frozen dataclasses. Source positions are carried for diagnostics
but excluded from equality, so two ASTs compare equal when they are
structurally identical.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple, Union

Pos = Optional[Tuple[int, int]]

BUILTIN_FIELDS = {"sip": 32, "dip": 32, "sport": 16, "dport": 16, "proto": 8}

CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*", "/", "%")

DEFAULT_WINDOW_NS = 10_000_000_000


def _pos():
    return field(default=None, compare=False, repr=False)


# -- expressions -------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class StrLit:
    text: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Name:
    """Unresolved identifier; validation turns it into a field, constant or monitor."""
    ident: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class FieldRef:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class MonitorRef:
    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Count:
    """Inline ``count(P)`` inside an expression (hoisted by validation)."""
    pred: "Pred"
    window_ns: Optional[int] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"
    pos: Pos = _pos()


Expr = Union[Const, StrLit, Name, FieldRef, MonitorRef, Count, BinOp]


# -- list items --------------------------------------------------------------

@dataclass(frozen=True)
class Prefix:
    value: int
    length: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class Masked:
    value: int
    mask: int
    pos: Pos = _pos()


ListItem = Union[Const, StrLit, Prefix, Masked]


# -- predicates --------------------------------------------------------------

@dataclass(frozen=True)
class BoolConst:
    value: bool
    pos: Pos = _pos()


@dataclass(frozen=True)
class Cmp:
    op: str
    left: Expr
    right: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Member:
    """``field in list``; ``items`` is set for inline ``prefix(...)`` lists."""
    field: str
    list: Optional[str] = None
    items: Optional[Tuple[ListItem, ...]] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class And:
    left: "Pred"
    right: "Pred"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Or:
    left: "Pred"
    right: "Pred"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Not:
    pred: "Pred"
    pos: Pos = _pos()


Pred = Union[BoolConst, Cmp, Member, And, Or, Not]


# -- actions and policies ----------------------------------------------------

@dataclass(frozen=True)
class Drop:
    pos: Pos = _pos()

    def __str__(self):
        return "drop"


@dataclass(frozen=True)
class Fwd:
    port: Union[str, int]
    pos: Pos = _pos()

    def __str__(self):
        return f"fwd({self.port})"


@dataclass(frozen=True)
class Flood:
    pos: Pos = _pos()

    def __str__(self):
        return "flood"


@dataclass(frozen=True)
class Log:
    pos: Pos = _pos()

    def __str__(self):
        return "log"


Action = Union[Drop, Fwd, Flood, Log]
ACTION_TYPES = (Drop, Fwd, Flood, Log)


@dataclass(frozen=True)
class If:
    pred: Pred
    then: "Policy"
    orelse: Optional["Policy"] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Par:
    """Parallel composition; evaluation takes the first branch that yields an action."""
    parts: Tuple["Policy", ...]
    pos: Pos = _pos()


Policy = Union[Drop, Fwd, Flood, Log, If, Par]


def par(parts):
    """Build a flattened parallel composition (a single part is returned as is)."""
    flat = []
    for p in parts:
        if isinstance(p, Par):
            flat.extend(p.parts)
        else:
            flat.append(p)
    if len(flat) == 1:
        return flat[0]
    return Par(tuple(flat))


# -- declarations ------------------------------------------------------------

@dataclass(frozen=True)
class ContextFieldDecl:
    name: str
    width: int = 32
    signed: bool = False
    header: Optional[str] = None
    pos: Pos = _pos()

    @property
    def header_name(self):
        return self.header or self.name

    @property
    def lo(self):
        return -(1 << (self.width - 1)) if self.signed else 0

    @property
    def hi(self):
        return (1 << (self.width - 1)) - 1 if self.signed else (1 << self.width) - 1


@dataclass(frozen=True)
class ConstList:
    name: str
    items: Tuple[ListItem, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class ConstDef:
    name: str
    value: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class StringDef:
    text: str
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class MonitorExpr:
    id: str
    pred: Pred
    window_ns: int = DEFAULT_WINDOW_NS
    pos: Pos = _pos()


@dataclass(frozen=True)
class PolicyAst:
    fields: Tuple[ContextFieldDecl, ...] = ()
    lists: Tuple[ConstList, ...] = ()
    consts: Tuple[ConstDef, ...] = ()
    strings: Tuple[StringDef, ...] = ()
    monitors: Tuple[MonitorExpr, ...] = ()
    body: Optional[Policy] = None
    name: Optional[str] = field(default=None, compare=False)

    def list_by_name(self, name):
        for lst in self.lists:
            if lst.name == name:
                return lst
        return None

    def field_by_name(self, name):
        for f in self.fields:
            if f.name == name:
                return f
        return None
