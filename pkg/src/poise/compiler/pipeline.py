"""End-to-end compilation: validate, check conflicts, lower, optimize, allocate."""
from __future__ import annotations

from typing import Union

from ..lang.parser import parse
from ..lang.syntax import PolicyAst
from ..lang.validate import ValidatedPolicy, validate
from .conflicts import detect_conflicts
from .ir import ResourceModel, SwitchProgram
from .lower import lower
from .passes import OptimizeOptions, allocate, optimize

NO_OPTIMIZATION = OptimizeOptions(dedup=False, merge=False, collapse=False)


def compile_policy(policy: Union[str, PolicyAst, ValidatedPolicy],
                   resources: ResourceModel = ResourceModel(),
                   optimize_tables: Union[bool, OptimizeOptions] = True,
                   check_conflicts: bool = True,
                   default_action=None,
                   name=None) -> SwitchProgram:
    if isinstance(policy, str):
        policy = parse(policy)
    vp = validate(policy)
    if check_conflicts:
        detect_conflicts(vp)
    ir = lower(vp)
    if optimize_tables is True:
        opts = OptimizeOptions()
    elif optimize_tables is False:
        opts = NO_OPTIMIZATION
    else:
        opts = optimize_tables
    ir = optimize(ir, resources, opts)
    return allocate(ir, resources, default_action, name=name or vp.ast.name)
