import random

import pytest

from rudic.store import (
    DACT_NS,
    RDF_TYPE,
    Fact,
    OntologyParseError,
    RangeViolation,
    Resource,
    SchemaError,
    TupleStore,
    UndeclaredError,
    dump_ontology,
    load_ontology,
)

NS = "http://example.org/app#"

AGENT_ONTOLOGY = """\
@prefix : <http://example.org/app#> .
:Agent rdf:type rdfs:Class .
:Animate rdfs:subClassOf :Agent .
:Inanimate rdfs:subClassOf :Agent .
:name rdfs:domain :Agent .
:name rdfs:range xsd:string .
:name rudi:functional true .
:age rdfs:domain :Animate .
:age rdfs:range xsd:int .
:age rudi:functional true .
"""


def res(local: str) -> Resource:
    return Resource(NS + local)


@pytest.fixture
def store() -> TupleStore:
    st = TupleStore()
    st.load_ontology(AGENT_ONTOLOGY)
    return st


# ---------------------------------------------------------------------------
# ontology loading
# ---------------------------------------------------------------------------


def test_load_agent_ontology_counts(store):
    assert store.schema.user_classes() == {NS + "Agent", NS + "Animate", NS + "Inanimate"}
    assert store.schema.user_properties() == {NS + "name", NS + "age"}


def test_empty_source_is_empty_schema():
    schema = load_ontology("")
    assert schema.user_classes() == set()
    assert schema.user_properties() == set()
    assert schema.instances == []


def test_cyclic_subclass_rejected():
    text = """\
@prefix : <http://example.org/app#> .
:C rdfs:subClassOf :D .
:D rdfs:subClassOf :C .
"""
    with pytest.raises(SchemaError):
        load_ontology(text)


def test_property_without_range_rejected():
    text = """\
@prefix : <http://example.org/app#> .
:A rdf:type rdfs:Class .
:p rdfs:domain :A .
"""
    with pytest.raises(SchemaError):
        load_ontology(text)


def test_parse_error_carries_position():
    with pytest.raises(OntologyParseError) as exc:
        load_ontology(":broken line without dot\n")
    assert exc.value.line == 1


def test_abox_loaded_at_time_zero(store):
    st = TupleStore()
    st.load_ontology(AGENT_ONTOLOGY + ":u rdf:type :Animate .\n:u :age 7 .\n")
    assert all(f.t == 0 for f in st.facts)
    assert st.latest_value(res("u"), res("age")) == 7


def test_ontology_round_trip_is_fixed_point(store):
    text = AGENT_ONTOLOGY + ":u rdf:type :Animate .\n:u :name \"Jo\\\"e\" .\n"
    schema1 = load_ontology(text)
    dumped1 = dump_ontology(schema1)
    schema2 = load_ontology(dumped1)
    dumped2 = dump_ontology(schema2)
    assert dumped1 == dumped2
    assert schema1.user_classes() == schema2.user_classes()
    assert schema1.user_properties() == schema2.user_properties()
    assert schema1.instances == schema2.instances


# ---------------------------------------------------------------------------
# insertion and the latest view
# ---------------------------------------------------------------------------


def test_insert_returns_fact_with_fresh_time(store):
    user = store.create_instance(res("Animate"))
    f1 = store.insert(user, res("name"), "Joe")
    assert f1.o == "Joe"
    f2 = store.insert(user, res("age"), 15)
    f3 = store.insert(user, res("age"), 16)
    assert f2.t < f3.t
    assert store.latest_value(user, res("age")) == 16
    # both retained
    assert [v for v, _ in store.history(user, res("age"))] == [15, 16]


def test_insert_undeclared_predicate(store):
    user = store.create_instance(res("Animate"))
    with pytest.raises(UndeclaredError):
        store.insert(user, res("nope"), 1)


def test_insert_range_violation(store):
    user = store.create_instance(res("Animate"))
    with pytest.raises(RangeViolation):
        store.insert(user, res("age"), "abc")


def test_latest_value_absent(store):
    user = store.create_instance(res("Animate"))
    assert store.latest_value(user, res("age")) is None


def test_retract_masks_value(store):
    user = store.create_instance(res("Animate"))
    store.insert(user, res("age"), 12)
    store.retract(user, res("age"))
    assert store.latest_value(user, res("age")) is None
    # history keeps the full trail
    assert len(store.history(user, res("age"))) == 2


def test_append_only_and_monotone_time(store):
    user = store.create_instance(res("Animate"))
    counts = []
    for i in range(20):
        store.insert(user, res("age"), i)
        counts.append(len(store.facts))
    assert counts == sorted(counts)
    times = [f.t for f in store.facts]
    assert all(a < b for a, b in zip(times, times[1:]))


def test_latest_value_matches_scan_oracle():
    rng = random.Random(1234)
    st = TupleStore()
    st.load_ontology(AGENT_ONTOLOGY)
    subjects = [st.create_instance(res("Animate")) for _ in range(2)]
    for _ in range(1000):
        store_subject = rng.choice(subjects)
        st.insert(store_subject, res("age"), rng.randrange(100))
    for s in subjects:
        # oracle: brute-force scan of the whole log for the max-t match
        best = None
        for f in st.facts:
            if f.s == s and f.p.iri == NS + "age":
                if best is None or f.t >= best.t:
                    best = f
        assert st.latest_value(s, res("age")) == (best.o if best else None)


def test_history_sorted_oracle():
    rng = random.Random(99)
    st = TupleStore()
    st.load_ontology(AGENT_ONTOLOGY)
    user = st.create_instance(res("Animate"))
    values = [rng.randrange(1000) for _ in range(200)]
    for v in values:
        st.insert(user, res("age"), v)
    hist = st.history(user, res("age"))
    assert len(hist) == 200
    assert [v for v, _ in hist] == values
    times = [t for _, t in hist]
    assert times == sorted(times)


# ---------------------------------------------------------------------------
# non-functional properties
# ---------------------------------------------------------------------------

MULTI_ONTOLOGY = AGENT_ONTOLOGY + """\
:likes rdfs:domain :Agent .
:likes rdfs:range xsd:string .
:likes rudi:functional false .
"""


def test_non_functional_accumulates():
    st = TupleStore()
    st.load_ontology(MULTI_ONTOLOGY)
    u = st.create_instance(res("Animate"))
    st.insert(u, res("likes"), "tea")
    st.insert(u, res("likes"), "rain")
    assert st.latest_value(u, res("likes")) == ["tea", "rain"]
    st.retract(u, res("likes"))
    assert st.latest_value(u, res("likes")) == []
    st.insert(u, res("likes"), "sun")
    assert st.latest_value(u, res("likes")) == ["sun"]


# ---------------------------------------------------------------------------
# query
# ---------------------------------------------------------------------------


def test_query_by_value(store):
    user = store.create_instance(res("Animate"))
    store.insert(user, res("name"), "Joe")
    rows = store.query(("?x", res("name"), "Joe"))
    assert rows == [{"x": user}]


def test_query_full_wildcard(store):
    user = store.create_instance(res("Animate"))
    store.insert(user, res("age"), 3)
    rows = store.query((None, None, None))
    # one row per distinct binding; all wildcards bind nothing, so one row
    assert rows == [{}]


def test_query_matches_naive_filter_oracle():
    rng = random.Random(7)
    st = TupleStore()
    st.load_ontology(MULTI_ONTOLOGY)
    subjects = [st.create_instance(res("Animate")) for _ in range(5)]
    preds = [res("age"), res("name"), res("likes")]
    for _ in range(200):
        s = rng.choice(subjects)
        p = rng.choice(preds)
        if p.iri.endswith("age"):
            st.insert(s, p, rng.randrange(5))
        else:
            st.insert(s, p, rng.choice(["a", "b", "c"]))
    for _ in range(50):
        s_pat = rng.choice([None, "?s", rng.choice(subjects)])
        p_pat = rng.choice([None, "?p", rng.choice(preds)])
        o_pat = rng.choice([None, "?o", rng.randrange(5), "b"])
        lo = rng.randrange(0, 10)
        hi = lo + rng.randrange(0, 400)
        rows = st.query((s_pat, p_pat, o_pat), time_window=(lo, hi))

        # oracle: naive filter over the fact list, collecting binding rows
        expected = []
        for f in st.facts:
            if not (lo <= f.t <= hi):
                continue
            binding = {}
            ok = True
            for pat, actual in ((s_pat, f.s), (p_pat, f.p), (o_pat, f.o)):
                if pat is None or pat == "?":
                    continue
                if isinstance(pat, str) and pat.startswith("?"):
                    name = pat[1:]
                    if name in binding and binding[name] != actual:
                        ok = False
                        break
                    binding[name] = actual
                elif pat != actual or isinstance(pat, bool) != isinstance(actual, bool):
                    ok = False
                    break
            if ok and binding not in expected:
                expected.append(binding)
        assert rows == expected


# ---------------------------------------------------------------------------
# class reasoning
# ---------------------------------------------------------------------------


def test_subclass_basics(store):
    assert store.is_subclass_of(res("Animate"), res("Agent"))
    assert store.is_subclass_of(res("Agent"), res("Agent"))
    assert not store.is_subclass_of(res("Agent"), res("Animate"))
    with pytest.raises(UndeclaredError):
        store.is_subclass_of(res("Ghost"), res("Agent"))


def test_instance_of(store):
    user = store.create_instance(res("Animate"))
    assert store.instance_of(user, res("Animate"))
    assert store.instance_of(user, res("Agent"))
    assert not store.instance_of(user, res("Inanimate"))
    # an untyped resource belongs to no class
    assert not store.instance_of(Resource(NS + "mystery"), res("Agent"))


def test_create_instance_distinct_and_typed(store):
    a = store.create_instance(res("Animate"))
    b = store.create_instance(res("Animate"))
    assert a != b
    assert store.instance_of(a, res("Animate"))
    with pytest.raises(UndeclaredError):
        store.create_instance(res("Ghost"))


def random_dag(rng: random.Random, n_classes: int, n_edges: int):
    """Random DAG as (names, edges) where edges only point to lower indexes."""
    names = [f"C{i}" for i in range(n_classes)]
    edges = set()
    for _ in range(n_edges):
        a = rng.randrange(1, n_classes)
        b = rng.randrange(0, a)
        edges.add((names[a], names[b]))
    return names, sorted(edges)


def reachability_oracle(names, edges):
    """Floyd-Warshall closure over the subclass graph, reflexive."""
    idx = {n: i for i, n in enumerate(names)}
    n = len(names)
    reach = [[False] * n for _ in range(n)]
    for i in range(n):
        reach[i][i] = True
    for a, b in edges:
        reach[idx[a]][idx[b]] = True
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                row_k = reach[k]
                row_i = reach[i]
                for j in range(n):
                    if row_k[j]:
                        row_i[j] = True
    return lambda a, b: reach[idx[a]][idx[b]]


def test_subclass_matches_reachability_oracle_on_random_dags():
    rng = random.Random(2024)
    for _ in range(30):
        n = rng.randrange(2, 51)
        e = rng.randrange(0, min(200, n * (n - 1) // 2 + 1))
        names, edges = random_dag(rng, n, e)
        lines = ["@prefix : <http://example.org/app#> ."]
        lines += [f":{name} rdf:type rdfs:Class ." for name in names]
        lines += [f":{a} rdfs:subClassOf :{b} ." for a, b in edges]
        schema = load_ontology("\n".join(lines) + "\n")
        oracle = reachability_oracle(names, edges)
        for a in names:
            for b in names:
                assert schema.is_subclass_of(res(a), res(b)) == oracle(a, b)


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------


def test_snapshot_round_trip_bytes(store):
    user = store.create_instance(res("Animate"))
    store.insert(user, res("name"), "Joe")
    store.insert(user, res("age"), 15)
    store.retract(user, res("age"))
    text1 = store.dump_snapshot(meta={"session": 1, "clock": 900})
    st2 = TupleStore()
    meta = st2.load_snapshot(text1)
    assert meta == {"session": 1, "clock": 900}
    assert st2.facts == store.facts
    text2 = st2.dump_snapshot(meta=meta)
    assert text2 == text1


def test_snapshot_preserves_instance_counter(store):
    store.create_instance(res("Animate"))
    store.create_instance(res("Animate"))
    text = store.dump_snapshot()
    st2 = TupleStore()
    st2.load_snapshot(text)
    c = st2.create_instance(res("Animate"))
    assert c.local_name() == "animate_3"


def test_insert_throughput_sane(store):
    import time

    user = store.create_instance(res("Animate"))
    n = 20000
    t0 = time.perf_counter()
    for i in range(n):
        store.insert(user, res("age"), i)
    dt = time.perf_counter() - t0
    assert n / dt > 10_000


def test_builtin_dact_hierarchy_present(store):
    greeting = Resource(DACT_NS + "Greeting")
    initial = Resource(DACT_NS + "InitialGreeting")
    assert store.is_subclass_of(initial, greeting)
    assert initial.iri in store.schema.da_tokens()
    assert Resource(DACT_NS + "Meeting").iri in store.schema.frames()
