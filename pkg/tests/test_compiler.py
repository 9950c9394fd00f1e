import math
import random
import time

import pytest
from hypothesis import given, settings, strategies as st

from poise import corpus
from poise.compiler import (
    CompileError, ConflictError, ResourceError, ResourceModel, TableSpec, build_tables,
    compile_monitors, compile_policy, detect_conflicts, lower_expressions, program_from_json,
    program_to_json, render,
)
from poise.compiler.passes import allocate, optimize
from poise.compiler.pipeline import NO_OPTIMIZATION
from poise.compiler.unitgen import _search, analytic_max_units, max_units, unit_ir, unit_source
from poise.dataplane import Evaluator
from poise.lang import Interpreter, PolicyError, compose, parse, validate
from poise.lang.syntax import Drop, Fwd

from policygen import all_contexts, random_context, random_policy


def vp_of(src):
    return validate(parse(src))


# -- corpus ------------------------------------------------------------------------

@pytest.mark.parametrize("name", corpus.NAMES)
def test_corpus_compiles(name):
    t0 = time.perf_counter()
    prog = compile_policy(corpus.load(name))
    assert time.perf_counter() - t0 < 1.0
    assert prog.rounds == 1
    assert prog.name == name


# -- lowering ---------------------------------------------------------------------

def test_p3_distance_ops():
    ops = lower_expressions(vp_of(corpus.source("p3")))
    assert sorted(op.op for op in ops) == ["add", "lt", "mul", "mul", "sub", "sub"]
    (cmp,) = [op for op in ops if op.op == "lt"]
    assert cmp.signed and cmp.args[1] == ("const", 1_000_000)


@pytest.mark.parametrize("expr", ["time / 7", "time % 6", "time / 0", "time / dev", "time % x"])
def test_division_rejected(expr):
    with pytest.raises(CompileError, match="unimplementable operation"):
        compile_policy(f"if match({expr} > 1) then drop")


def test_power_of_two_division_is_a_shift():
    ops = lower_expressions(vp_of("if match(time / 8 > 1) then drop"))
    assert ops[0].op == "shr" and ops[0].args == (("field", "time"), ("const", 3))
    ops = lower_expressions(vp_of("if match(time % 8 > 1) then drop"))
    assert ops[0].op == "and" and ops[0].args[1] == ("const", 7)


# -- tables ------------------------------------------------------------------------

def key_shape(items):
    """Independent classification from the literal list text."""
    if all("&&&" in i for i in items):
        return "ternary"
    if all("/" in i for i in items):
        return "lpm"
    return "exact"


def test_adminlst_exact_table():
    (t,) = build_tables(vp_of(corpus.source("p4")))
    assert t.kind == "exact" and t.field == "usr" and len(t.entries) == 2
    assert t.memory == "sram"
    prog = compile_policy(corpus.load("p4"))
    hit = [b for b in prog.branches if b.action == Fwd("server")]
    assert hit


def test_no_membership_no_tables():
    assert build_tables(vp_of(corpus.source("p3"))) == []
    assert build_tables(vp_of("drop")) == []


@pytest.mark.parametrize("items", [
    ["10.0.0.0/8", "172.16.0.0/12", "192.168.0.0/16"],
    ["1", "2", "3"],
    ["0x10 &&& 0xF0", "0x3 &&& 0xF"],
])
def test_match_kind_by_key_shape(items):
    (t,) = build_tables(vp_of(f"def L = [{', '.join(items)}]\nif match(sip in L) then drop"))
    assert t.kind == key_shape(items)
    assert len(t.entries) == len(items)
    assert t.memory == ("tcam" if t.kind == "ternary" else "sram")


# -- monitors ------------------------------------------------------------------------

def test_p4_monitor_register():
    (m,) = compile_monitors(vp_of(corpus.source("p4")))
    assert m.width == 32 and m.register != m.ts_register
    assert m.timeout_ns == 10_000_000_000


def test_monitor_lists():
    assert compile_monitors(vp_of(corpus.source("p1"))) == []
    ms = compile_monitors(vp_of("a = count(match(x > 1), 1s)\nb = count(match(y < 2), 2s)\n"
                                "if match(a > 0 & b > 0) then drop"))
    assert [m.id for m in ms] == ["a", "b"]
    assert len({m.register for m in ms} | {m.ts_register for m in ms}) == 4


# -- conflicts -------------------------------------------------------------------------

def brute_overlap(lo_a, lo_b, op_a, op_b):
    fa = {">": lambda t: t > lo_a, "<": lambda t: t < lo_a}[op_a]
    fb = {">": lambda t: t > lo_b, "<": lambda t: t < lo_b}[op_b]
    # time is bit<32>; with bounds <= 2400 every value above 2400 behaves like 2401
    return any(fa(t) and fb(t) for t in range(0, 2402))


def conflict_src(a, op_a, b, op_b):
    return f"(if match(time {op_a} {a}) then drop) | (if match(time {op_b} {b}) then fwd(server))"


def test_conflict_examples():
    assert brute_overlap(10, 15, ">", ">")
    with pytest.raises(ConflictError) as exc:
        detect_conflicts(vp_of(conflict_src(10, ">", 15, ">")))
    assert exc.value.first and exc.value.second and exc.value.first != exc.value.second
    assert not brute_overlap(10, 15, "<", ">")
    assert detect_conflicts(vp_of(conflict_src(10, "<", 15, ">")))


def test_self_composition_is_not_a_conflict():
    for name in ("p1", "p2", "p5"):
        p = validate(corpus.load(name))
        assert detect_conflicts(validate(compose([p, p])))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2400), st.integers(0, 2400), st.sampled_from("<>"), st.sampled_from("<>"))
def test_conflicts_sound_for_time_ranges(a, b, op_a, op_b):
    vp = vp_of(conflict_src(a, op_a, b, op_b))
    # intervals are exact for single comparisons, so the check is also complete here
    if brute_overlap(a, b, op_a, op_b):
        with pytest.raises(ConflictError):
            detect_conflicts(vp)
    else:
        assert detect_conflicts(vp)


# -- optimization ------------------------------------------------------------------------

def test_dedup_of_composed_tables():
    a = vp_of('def authlst = ["dev1", "dev2"]\nif match(dev in authlst & time > 5) then fwd(server)')
    b = vp_of('def authlst = ["dev1", "dev2"]\nif match(dev in authlst) then fwd(server)')
    c = validate(compose([a, b]))
    assert len(compile_policy(c, optimize_tables=NO_OPTIMIZATION).tables) == 2
    (t,) = compile_policy(c).tables
    assert t.field == "dev"


def test_six_types_two_rounds():
    prog = compile_policy(unit_source(1, 6))
    assert prog.rounds == 2 == math.ceil(6 / 5)


def test_single_type_optimize_is_identity():
    ir = unit_ir(1, 1)
    out = optimize(ir)
    assert out.tables[0].entries == ir.tables[0].entries and out.rounds == 1
    assert out.branches == ir.branches


def test_unit_ir_matches_full_pipeline():
    for n, k in [(1, 1), (3, 2), (2, 7)]:
        full = compile_policy(unit_source(n, k), check_conflicts=False)
        fast = allocate(optimize(unit_ir(n, k)))
        assert fast.tables == full.tables
        assert fast.branches == full.branches
        assert fast.rounds == full.rounds
        assert fast.memory == full.memory


# -- allocation ---------------------------------------------------------------------------

def test_type_limits():
    with pytest.raises(ResourceError) as exc:
        allocate(optimize(unit_ir(1, 41, tables_only=True)))
    assert exc.value.resource == "tables"
    prog = allocate(optimize(unit_ir(1, 40, tables_only=True)))
    assert prog.rounds == 8


def test_single_unit_policy():
    prog = compile_policy(unit_source(1, 1))
    assert len(prog.tables) == 1 and prog.stages_used() == [0] and prog.rounds == 1


@pytest.mark.parametrize("k", [1, 4, 5, 6, 11, 25, 39, 40])
def test_rounds_formula(k):
    assert allocate(optimize(unit_ir(1, k, tables_only=True))).rounds == math.ceil(k / 5)


def test_recirculation_limit():
    rm = ResourceModel(max_recirculations=2)
    with pytest.raises(ResourceError) as exc:
        allocate(optimize(unit_ir(1, 11, tables_only=True), rm), rm)
    assert exc.value.resource == "recirculations"


def test_memory_exhaustion_names_resource():
    rm = ResourceModel(sram_bytes=500, tcam_bytes=80)
    with pytest.raises(ResourceError) as exc:
        compile_policy(unit_source(101, 1), rm, check_conflicts=False)
    assert exc.value.resource == "SRAM"
    items = ", ".join(f"{i} &&& 255" for i in range(11))
    with pytest.raises(ResourceError) as exc:
        compile_policy(f"def L = [{items}]\nif match(x in L) then drop", rm)
    assert exc.value.resource == "TCAM"


def test_entry_cost_model():
    # key bits plus an action byte, rounded up to bytes; ternary stores key and mask
    for width in (1, 8, 16, 32, 48):
        assert TableSpec("t", "f", width, "exact", ()).entry_bytes == -(-(width + 8) // 8)
        assert TableSpec("t", "f", width, "lpm", ()).entry_bytes == -(-(width + 8) // 8)
        assert TableSpec("t", "f", width, "ternary", ()).entry_bytes == 2 * -(-width // 8)
    assert TableSpec("t", "f", 32, "exact", ()).entry_bytes == 5


def test_capacity_calibration():
    assert max_units(1) == 1_200_000
    assert max_units(40) == 30_000
    assert max_units(41) == 0


@pytest.mark.parametrize("types", [1, 2, 3, 6, 9])
def test_closed_form_agrees_with_search(types):
    rm = ResourceModel(stages=3, tables_per_stage=3, sram_bytes=3000, max_recirculations=3)
    assert max_units(types, rm) == _search(types, rm)
    if analytic_max_units(types, rm):
        assert analytic_max_units(types, rm) == _search(types, rm)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 200))
def test_resource_monotonicity(k, n):
    a = allocate(optimize(unit_ir(n, k, tables_only=True)))
    b = allocate(optimize(unit_ir(n + 1, k, tables_only=True)))
    assert len(b.tables) >= len(a.tables)
    assert len(b.stages_used()) >= len(a.stages_used())
    assert b.memory.sram_used >= a.memory.sram_used
    assert b.rounds >= a.rounds
    if k < 40:
        c = allocate(optimize(unit_ir(n, k + 1, tables_only=True)))
        assert len(c.tables) >= len(a.tables) and c.memory.sram_used >= a.memory.sram_used


# -- rendering and serialization ------------------------------------------------------------

def test_render_p3_gps_header():
    text = render(compile_policy(corpus.load("p3")))
    assert "header gps_t" in text and "lat;" in text and "lon;" in text
    assert "hdr.gps.lat" in text


def test_render_drop_all():
    prog = compile_policy("drop")
    text = render(prog)
    assert prog.tables == () and "table " not in text and "mark_to_drop" in text


@pytest.mark.parametrize("name", corpus.NAMES)
def test_render_deterministic_and_json_round_trip(name):
    a = compile_policy(corpus.load(name))
    b = compile_policy(corpus.load(name))
    assert render(a) == render(b)
    assert program_from_json(program_to_json(a)) == a


# -- differential properties ------------------------------------------------------------------

def _compiled(src, **kw):
    try:
        vp = validate(parse(src))
        return vp, compile_policy(vp, check_conflicts=False, **kw)
    except (PolicyError, ResourceError):
        return None, None


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 3))
def test_compiled_matches_interpreter_exhaustive(seed, m1):
    vp, prog = _compiled(random_policy(random.Random(seed)))
    if prog is None:
        return
    interp, ev = Interpreter(vp), Evaluator(prog)
    mons = {"m1": m1}
    for ctx in all_contexts():
        assert ev.decide(ctx, mons).action == interp.evaluate(ctx, mons), ctx


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_optimization_is_sound(seed):
    rng = random.Random(seed)
    src = random_policy(rng)
    _, opt = _compiled(src)
    _, raw = _compiled(src, optimize_tables=NO_OPTIMIZATION)
    if opt is None or raw is None:
        return
    a, b = Evaluator(opt), Evaluator(raw)
    for _ in range(300):
        ctx, mons = random_context(rng)
        assert a.decide(ctx, mons).action == b.decide(ctx, mons).action


def test_default_action_option():
    prog = compile_policy("if match(x > 5) then fwd(server)", default_action=Fwd("mbox"))
    assert Evaluator(prog).decide({"x": 1}).action == Fwd("mbox")
    assert Evaluator(compile_policy("if match(x > 5) then fwd(server)")).decide({"x": 1}).action == Drop()
