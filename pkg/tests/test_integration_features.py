"""End-to-end checks for language features that cut across all stages."""

import sys

from conftest import compile_and_engine, write_project
from rudic.engine import SetEvent
from rudic.store import Resource

NS = "http://example.org/feat#"

ONTOLOGY = """\
@prefix : <http://example.org/feat#> .
:Thing rdf:type rdfs:Class .
:n rdfs:domain :Thing .
:n rdfs:range xsd:int .
:n rudi:functional true .
:label rdfs:domain :Thing .
:label rdfs:range xsd:string .
:label rudi:functional true .
:tags rdfs:domain :Thing .
:tags rdfs:range xsd:string .
:tags rudi:functional false .
"""


def test_defined_function_in_condition_and_action(tmp_path):
    src = (
        "int double(int v) { return v + v; }\n"
        "string shout(string s) { return s + s; }\n"
        "thing = new Thing;\n"
        "thing.n = 4;\n"
        "r: if (double(thing.n) == 8 && !thing.label) {\n"
        '  thing.label = shout("ha");\n'
        "}\n"
    )
    project = write_project(tmp_path, ONTOLOGY, {"main": src})
    _, _, engine = compile_and_engine(project)
    engine.start()
    thing = engine.globals["thing"]
    assert engine.store.latest_value(thing, Resource(NS + "label")) == "haha"


def test_else_branch_executes_on_false(tmp_path):
    src = (
        "thing = new Thing;\n"
        "thing.n = 10;\n"
        "r: if (thing.n <= 5) { thing.label = \"low\"; }\n"
        "else { branch = \"high\"; q: if (!thing.label) { thing.label = branch; } }\n"
    )
    project = write_project(tmp_path, ONTOLOGY, {"main": src})
    _, _, engine = compile_and_engine(project)
    result = engine.start()
    thing = engine.globals["thing"]
    assert engine.store.latest_value(thing, Resource(NS + "label")) == "high"
    # the nested rule q logged too, with its own label
    labels = {rec.label for rec in result.records}
    assert labels == {"r", "q"}


def test_non_functional_collection_existence(tmp_path):
    src = (
        "thing = new Thing;\n"
        "r: if (thing.tags && !thing.label) { thing.label = \"tagged\"; }\n"
    )
    project = write_project(tmp_path, ONTOLOGY, {"main": src})
    _, _, engine = compile_and_engine(project)
    engine.start()
    thing = engine.globals["thing"]
    # empty collection: existence test is false
    assert engine.store.latest_value(thing, Resource(NS + "label")) is None
    engine.process_event(SetEvent(thing, Resource(NS + "tags"), "x"))
    assert engine.store.latest_value(thing, Resource(NS + "label")) == "tagged"


def test_extension_function_dispatch(tmp_path, monkeypatch):
    (tmp_path / "ext_mod.py").write_text(
        "def emphasize(s):\n    return s.upper() + '!'\n"
    )
    monkeypatch.syspath_prepend(str(tmp_path))
    src = (
        "thing = new Thing;\n"
        't: if (!thing.label) { thing.label = emphasize("ok"); }\n'
    )
    extra = (
        "functions:\n"
        "  - {name: emphasize, params: [string], returns: string, pure: true, python: \"ext_mod:emphasize\"}\n"
    )
    project = write_project(tmp_path, ONTOLOGY, {"main": src}, extra=extra)
    _, _, engine = compile_and_engine(project)
    engine.start()
    thing = engine.globals["thing"]
    assert engine.store.latest_value(thing, Resource(NS + "label")) == "OK!"


def test_arithmetic_and_interpolation_full_path(tmp_path):
    src = (
        "thing = new Thing;\n"
        "thing.n = 7;\n"
        "r: if (thing.n % 2 == 1 && !thing.label) {\n"
        '  thing.label = "n is {thing.n}, half is {thing.n / 2}";\n'
        "}\n"
    )
    project = write_project(tmp_path, ONTOLOGY, {"main": src})
    _, _, engine = compile_and_engine(project)
    engine.start()
    thing = engine.globals["thing"]
    assert engine.store.latest_value(thing, Resource(NS + "label")) == "n is 7, half is 3"


def test_class_and_instance_comparisons_full_path(tmp_path):
    ontology = ONTOLOGY + (
        ":Special rdfs:subClassOf :Thing .\n"
        ":mark rdfs:domain :Thing .\n"
        ":mark rdfs:range xsd:boolean .\n"
        ":mark rudi:functional true .\n"
    )
    src = (
        "a = new Special;\n"
        "sub: if (Special <= Thing && a <= Thing && !a.mark) { a.mark = true; }\n"
        "nosub: if (Thing <= Special && !a.label) { a.label = \"impossible\"; }\n"
    )
    project = write_project(tmp_path, ontology, {"main": src})
    _, _, engine = compile_and_engine(project)
    engine.start()
    a = engine.globals["a"]
    assert engine.store.latest_value(a, Resource(NS + "mark")) is True
    assert engine.store.latest_value(a, Resource(NS + "label")) is None
