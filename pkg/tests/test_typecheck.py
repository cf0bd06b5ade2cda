from pathlib import Path

import pytest

from rudic.parser import parse_module
from rudic.semtypes import (
    BOOLEAN,
    DACT,
    DECIMAL,
    INT,
    STRING,
    ClassValue,
    Instance,
    resolve_overload,
)
from rudic.store import TupleStore, load_ontology
from rudic.typecheck import check_program, check_single_module

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

NS = "http://example.org/greeting#"


@pytest.fixture
def schema():
    st = TupleStore()
    st.load_ontology((CORPUS / "greeting" / "ontology.nt").read_text())
    return st.schema


def check_text(text, schema, name="m"):
    return check_single_module(parse_module(text, name), schema)


# ---------------------------------------------------------------------------
# operator overloading
# ---------------------------------------------------------------------------


def test_overload_numeric():
    assert resolve_overload("<=", INT, INT).kind == "numeric_cmp"
    assert resolve_overload("<", INT, DECIMAL).kind == "numeric_cmp"


def test_overload_subclass_and_instance():
    animate = ClassValue(NS + "Animate")
    agent = ClassValue(NS + "Agent")
    assert resolve_overload("<=", animate, agent).kind == "subclass_test"
    assert resolve_overload("<=", Instance(NS + "Animate"), agent).kind == "instance_of_test"


def test_overload_da_subsumption():
    assert resolve_overload("<=", DACT, DACT).kind == "da_subsumption"
    assert resolve_overload("==", DACT, DACT).kind == "da_eq"


def test_overload_off_table_is_none():
    assert resolve_overload("<=", INT, ClassValue(NS + "Agent")) is None
    assert resolve_overload("<", STRING, STRING) is None


# ---------------------------------------------------------------------------
# inference
# ---------------------------------------------------------------------------


def test_infer_new_and_field_access(schema):
    checked = check_text(
        "user = new Animate;\nr: if (user.age <= 0) { user.age = 15; }",
        schema,
    )
    assert checked.errors == []
    module = checked.modules["m"]
    assign = module.items[0]
    assert assign.value.sem_type == Instance(NS + "Animate")
    rule = module.rules[0]
    assert rule.cond.sem_type == BOOLEAN
    # the chain itself is typed int
    assert rule.cond.lhs.sem_type == INT


def test_chain_off_scalar_is_error(schema):
    checked = check_text("user = new Animate;\nr: if (user.age.name) { x = 1; }", schema)
    assert any("has no properties" in d.message for d in checked.errors)


def test_domain_mismatch_diagnostic(schema):
    # age is declared for Animate only
    checked = check_text("thing = new Inanimate;\nr: if (thing.age <= 0) { x = 1; }", schema)
    assert any("not declared for" in d.message for d in checked.errors)


def test_unknown_property(schema):
    checked = check_text("user = new Animate;\nr: if (user.shoeSize) { x = 1; }", schema)
    assert any("unknown property" in d.message for d in checked.errors)


def test_da_arg_access_is_string(schema):
    checked = check_text(
        'r: if (true) { da = #Greeting(Meeting); da.name = "x"; y = da.name; }',
        schema,
    )
    assert checked.errors == []


def test_greeting_corpus_checks_clean(schema):
    def loader(name):
        path = CORPUS / "greeting" / f"{name}.rudi"
        return parse_module(path.read_text(), name), str(path)

    checked = check_program("agent", loader, schema)
    assert checked.errors == []
    assert [li.module for li in checked.link][:2] == ["user_setup", "user_setup"]


def test_age_default_module_zero_diagnostics(schema):
    text = (CORPUS / "age_default" / "age_default.rudi").read_text()
    checked = check_text(text, schema, "age_default")
    assert checked.diagnostics == []
    rule = checked.modules["age_default"].rules[0]
    assert rule.cond.lhs.sem_type == INT
    assert rule.cond.sem_type == BOOLEAN


def test_import_cycle_diagnostic(schema):
    mods = {
        "a": parse_module("import b;\nx = 1;", "a"),
        "b": parse_module("import a;\ny = 2;", "b"),
    }

    def loader(name):
        return mods[name], f"{name}.rudi"

    checked = check_program("a", loader, schema)
    assert any("import cycle" in d.message for d in checked.errors)


def test_missing_import_diagnostic(schema):
    def loader(name):
        if name == "top":
            return parse_module("import ghost;", "top"), "top.rudi"
        raise KeyError(name)

    checked = check_program("top", loader, schema)
    assert any("cannot load module" in d.message for d in checked.errors)


def test_unknown_function(schema):
    checked = check_text("r: if (frobnicate()) { x = 1; }", schema)
    assert any("unknown function" in d.message for d in checked.errors)


def test_impure_call_rejected_in_condition(schema):
    checked = check_text("r: if (true) { x = 1; }\nq: if (newSession()) { y = 1; }", schema)
    assert any("not allowed in a condition" in d.message for d in checked.errors)


def test_type_mismatch_on_reassignment(schema):
    checked = check_text('x = 1;\nr: if (true) { x = "str"; }', schema)
    assert any("cannot assign" in d.message for d in checked.errors)


def test_assign_range_checked(schema):
    checked = check_text('user = new Animate;\nr: if (true) { user.age = "x"; }', schema)
    assert any("cannot assign string" in d.message for d in checked.errors)


def test_function_definition_and_call(schema):
    text = (
        "string shout(string s) { return s + s; }\n"
        "user = new Animate;\n"
        "r: if (user.name == shout(user.name)) { x = 1; }"
    )
    checked = check_text(text, schema)
    assert checked.errors == []


def test_function_purity_inferred(schema):
    text = (
        "string announce(string s) { emitDA(#Inform(Statement, text={s})); return s; }\n"
        "r: if (announce(\"hi\")) { x = 1; }"
    )
    checked = check_text(text, schema)
    assert any("not allowed in a condition" in d.message for d in checked.errors)


def test_unknown_da_token(schema):
    checked = check_text("r: if (saidInSession(#Zorg(Meeting))) { x = 1; }", schema)
    assert any("unknown dialogue-act token" in d.message for d in checked.errors)


def test_determinism(schema):
    text = (CORPUS / "greeting" / "user_setup.rudi").read_text()
    c1 = check_text(text, schema)
    c2 = check_text(text, schema)
    assert [d.format() for d in c1.diagnostics] == [d.format() for d in c2.diagnostics]
    assert c1.modules["m"] == c2.modules["m"]


def test_diagnostic_format(schema):
    checked = check_text("r: if (user.name) { x = 1; }", schema)
    line = checked.errors[0].format()
    assert line.startswith("m.rudi:1:8: error: ")


def test_runtime_values_match_static_types_fuzz():
    """Soundness: a well-typed expression evaluates to its type or absent."""
    import random

    import oracle_guarded as og
    from rudic.engine import Engine
    from rudic.lower import lower_program
    from rudic.semtypes import INT, Instance
    from rudic.store import Resource

    rng = random.Random(1212)
    for _ in range(120):
        store, subject = og.random_store(rng)
        chain = og.random_chain_text(rng)
        source = f"x = new Node;\nprobe: if (true) {{ y = {chain}; }}\n"
        checked = check_single_module(parse_module(source, "m"), store.schema)
        assert checked.errors == []
        typed_expr = checked.modules["m"].rules[0].then.stmts[0].value
        static_type = typed_expr.sem_type

        program = lower_program(checked)
        ir_assign = program.rules[0].then[0]
        engine = Engine(program, store)
        engine.globals["x"] = subject
        value = engine._eval(ir_assign.value, type("F", (), {"locals": {}})())

        if value is None:
            continue  # absent is always admissible
        if static_type == INT:
            assert isinstance(value, int) and not isinstance(value, bool)
        elif isinstance(static_type, Instance):
            assert isinstance(value, Resource)
        else:
            raise AssertionError(f"unexpected static type {static_type}")
