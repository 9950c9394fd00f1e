"""Policy compiler: lowers validated policies to a staged match-action program."""
from .conflicts import detect_conflicts
from .ir import (
    CONTEXT_PROTOCOL, AluOp, Branch, CompileError, ConflictError, ContextLayout, LayoutField,
    MemorySummary, MonitorSpec, ProgramIR, ResourceError, ResourceModel, SwitchProgram, TableSpec,
)
from .lower import build_tables, compile_monitors, lower, lower_expressions
from .passes import OptimizeOptions, allocate, optimize
from .pipeline import compile_policy
from .render import dump_program, load_program, program_from_json, program_to_json, render

__all__ = [
    "AluOp", "Branch", "CONTEXT_PROTOCOL", "CompileError", "ConflictError", "ContextLayout",
    "LayoutField", "MemorySummary", "MonitorSpec", "OptimizeOptions", "ProgramIR",
    "ResourceError", "ResourceModel", "SwitchProgram", "TableSpec", "allocate", "build_tables",
    "compile_monitors", "compile_policy", "detect_conflicts", "dump_program", "load_program",
    "lower", "lower_expressions", "optimize", "program_from_json", "program_to_json", "render",
]
