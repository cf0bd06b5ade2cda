import random

import pytest

import oracle_guarded as og
from rudic.engine import Engine
from rudic.ir import (
    AndNode,
    BaseTerm,
    Compare,
    Exists,
    NotNode,
    OrNode,
    ProposeInstr,
    TimeoutInstr,
    dump_program,
    load_program,
)
from rudic.lower import lower_program
from rudic.parser import parse_module
from rudic.selection import FirstSelector
from rudic.store import Resource, TupleStore
from rudic.typecheck import check_single_module

NS = "http://example.org/chain#"


def lower_condition(cond_text: str, mode: str = "strict", prelude: str = "x = new Node;\n"):
    store = TupleStore()
    store.load_ontology(og.CHAIN_ONTOLOGY)
    source = prelude + f"probe: if ({cond_text}) {{ }}\n"
    checked = check_single_module(parse_module(source, "m"), store.schema)
    assert checked.errors == [], checked.format_diagnostics()
    program = lower_program(checked, mode)
    return program, store


def term_sources(rule):
    return [info.source for info in rule.base_terms]


# ---------------------------------------------------------------------------
# guarded expansion structure
# ---------------------------------------------------------------------------


def test_comparison_expands_to_guard_plus_test():
    program, _ = lower_condition("x.val <= 0")
    rule = program.rules[0]
    assert term_sources(rule) == ["x.val", "x.val <= 0"]
    assert isinstance(rule.cond, AndNode)
    first, second = rule.cond.children
    assert isinstance(first, BaseTerm) and isinstance(first.expr, Exists)
    assert isinstance(second, BaseTerm) and isinstance(second.expr, Compare)


def test_bare_chain_is_existence_only():
    program, _ = lower_condition("x.next")
    rule = program.rules[0]
    assert term_sources(rule) == ["x.next"]
    assert isinstance(rule.cond, BaseTerm)
    assert isinstance(rule.cond.expr, Exists)


def test_two_link_chain_comparison_has_three_terms():
    program, _ = lower_condition("x.next.val == 1")
    rule = program.rules[0]
    assert term_sources(rule) == ["x.next", "x.next.val", "x.next.val == 1"]


def test_negated_chain_is_not_exists():
    program, _ = lower_condition("!x.next")
    rule = program.rules[0]
    assert isinstance(rule.cond, NotNode)
    assert isinstance(rule.cond.child, BaseTerm)
    assert isinstance(rule.cond.child.expr, Exists)


def test_defaulting_mode_uses_disjunction():
    program, _ = lower_condition("x.val <= 0", mode="defaulting")
    rule = program.rules[0]
    assert isinstance(rule.cond, OrNode)
    assert isinstance(rule.cond.children[0], NotNode)
    # same base terms as strict mode, different combinators
    assert term_sources(rule) == ["x.val", "x.val <= 0"]


def test_and_flattening_orders_terms_left_to_right():
    program, _ = lower_condition("x.val <= 0 && x.next")
    rule = program.rules[0]
    assert term_sources(rule) == ["x.val", "x.val <= 0", "x.next"]
    assert isinstance(rule.cond, AndNode) and len(rule.cond.children) == 3


# ---------------------------------------------------------------------------
# capture lists
# ---------------------------------------------------------------------------


def find_instr(block, cls):
    for stmt in block:
        if isinstance(stmt, cls):
            return stmt
        for attr in ("then", "els", "block"):
            sub = getattr(stmt, attr, None)
            if isinstance(sub, list):
                found = find_instr(sub, cls)
                if found is not None:
                    return found
    return None


def test_propose_captures_rule_local():
    text = (
        "x = new Node;\n"
        "r: if (x.val <= 0) {\n"
        "  da = #Inform(Statement);\n"
        '  propose("p") { da.text = "hi"; emitDA(da); }\n'
        "}\n"
    )
    store = TupleStore()
    store.load_ontology(og.CHAIN_ONTOLOGY)
    checked = check_single_module(parse_module(text, "m"), store.schema)
    assert checked.errors == []
    program = lower_program(checked)
    propose = find_instr(program.rules[0].then, ProposeInstr)
    assert propose is not None
    assert propose.captures == ["da"]


def test_timeout_lowering_carries_name_and_delay():
    text = 'r: if (true) { timeout("tick", 7000) { x = 1; } }\n'
    store = TupleStore()
    checked = check_single_module(parse_module(text, "m"), store.schema)
    assert checked.errors == []
    program = lower_program(checked)
    timeout = find_instr(program.rules[0].then, TimeoutInstr)
    assert timeout.name == "tick"
    assert timeout.delay.value == 7000
    # x is a rule local assigned inside the block: still in the capture set
    assert timeout.captures == ["x"]


def test_globals_are_not_captured():
    text = (
        "g = 5;\n"
        "r: if (true) { y = 1; "
        'propose("p") { z = g + y; emitDA(#Inform(Statement, n={z})); } }\n'
    )
    store = TupleStore()
    checked = check_single_module(parse_module(text, "m"), store.schema)
    assert checked.errors == []
    program = lower_program(checked)
    propose = find_instr(program.rules[0].then, ProposeInstr)
    assert propose.captures == ["y", "z"]


# ---------------------------------------------------------------------------
# artifact serialization
# ---------------------------------------------------------------------------


def test_ir_round_trip_and_determinism(corpus_dir):
    from rudic.project import load_project
    from rudic.runner import compile_project

    config = load_project(corpus_dir / "greeting" / "project.yml")
    program1 = compile_project(config).program
    program2 = compile_project(config).program
    text1 = dump_program(program1)
    text2 = dump_program(program2)
    assert text1 == text2
    loaded = load_program(text1)
    assert dump_program(loaded) == text1
    assert [r.label for r in loaded.rules] == [r.label for r in program1.rules]


def test_empty_module_lowers_to_empty_program():
    store = TupleStore()
    checked = check_single_module(parse_module("", "m"), store.schema)
    program = lower_program(checked)
    assert program.rules == [] and program.init == [] and program.round_items == []


# ---------------------------------------------------------------------------
# oracle equivalence: IR evaluation == guarded reference interpreter
# ---------------------------------------------------------------------------


def run_ir_condition(cond_text: str, store: TupleStore, subject: Resource, mode: str) -> bool:
    source = "x = new Node;\n" + f"probe: if ({cond_text}) {{ }}\n"
    checked = check_single_module(parse_module(source, "m"), store.schema)
    assert checked.errors == [], checked.format_diagnostics()
    program = lower_program(checked, mode)
    engine = Engine(program, store, selector=FirstSelector())
    engine.globals["x"] = subject
    return engine.eval_condition(program.rules[0].cond)


@pytest.mark.parametrize("mode", ["strict", "defaulting"])
def test_guarded_expansion_matches_oracle(mode):
    rng = random.Random(500 if mode == "strict" else 501)
    for _ in range(150):
        store, subject = og.random_store(rng)
        text = og.random_condition_text(rng)
        expected = og.oracle_eval_text(text, store, subject, mode)
        got = run_ir_condition(text, store, subject, mode)
        assert got == expected, f"mode={mode} expr={text}"


def test_expansion_equals_plain_comparison_on_full_data():
    # when every link exists, the guarded form equals the raw comparison
    rng = random.Random(7)
    store = TupleStore()
    store.load_ontology(og.CHAIN_ONTOLOGY)
    nodes = [store.create_instance(Resource(og.NS + "Node")) for _ in range(3)]
    for i, node in enumerate(nodes):
        store.insert(node, Resource(og.NS + "next"), nodes[(i + 1) % 3])
        store.insert(node, Resource(og.NS + "val"), i)
    for _ in range(50):
        links = ".".join("next" for _ in range(rng.randrange(1, 3)))
        op = rng.choice(og.CMP_OPS)
        lit = rng.randrange(-1, 4)
        text = f"x.{links}.val {op} {lit}"
        expected = og.oracle_eval_text(text, store, nodes[0], "strict")
        assert run_ir_condition(text, store, nodes[0], "strict") == expected
        assert run_ir_condition(text, store, nodes[0], "defaulting") == expected
